"""Latent Dirichlet Allocation fitted by batch variational inference.

The fit alternates a per-document E-step (coordinate ascent on the
variational Dirichlet parameters, warm-started across iterations) with a
global M-step, and records the evidence lower bound after every
iteration.  Warm-starting the per-document parameters makes each
iteration a joint coordinate-ascent step, so the recorded bound is
non-decreasing up to floating-point noise.

Stored matrices are the normalised variational means: each row of
``doc_topic`` and ``topic_term`` is a probability distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, logsumexp, psi

from .vectorize import DocTermMatrix

__all__ = ["LdaConfig", "LdaModel", "fit_lda", "lda_elbo"]

# Per-document coordinate-ascent loop; tight so the outer bound stays monotone.
_INNER_MAX_ITER = 1000
_INNER_TOL = 1e-10


@dataclass(frozen=True)
class LdaConfig:
    """Topic count, symmetric Dirichlet priors and solver settings."""

    k: int
    alpha: float | None = None  # doc-topic prior, defaults to 1/k
    beta: float | None = None  # topic-word prior, defaults to 1/k
    max_iter: int = 200
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / self.k)
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 / self.k)
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


@dataclass
class LdaModel:
    doc_topic: np.ndarray  # (D, K), rows sum to 1
    topic_term: np.ndarray  # (K, V), rows sum to 1
    elbo_trace: list[float]
    config: LdaConfig
    converged: bool
    # Variational Dirichlet parameters the distributions were normalised
    # from; kept so the bound can be recomputed on the fitted model.
    gamma_: np.ndarray = field(repr=False, default=None)
    lambda_: np.ndarray = field(repr=False, default=None)


def _dirichlet_expectation(x: np.ndarray) -> np.ndarray:
    """E[log p] for Dirichlet rows parameterised by x."""
    if x.ndim == 1:
        return psi(x) - psi(np.sum(x))
    return psi(x) - psi(np.sum(x, axis=1))[:, np.newaxis]


def _validate_tf(tf: DocTermMatrix) -> sp.csr_matrix:
    if tf.weighting != "tf":
        raise ValueError(f"LDA requires raw term counts, got weighting {tf.weighting!r}")
    mat = tf.values.tocsr()
    if mat.nnz and np.any(mat.data != np.floor(mat.data)):
        raise ValueError("TF matrix must contain integer counts")
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(row_sums == 0):
        empty = [tf.doc_ids[i] for i in np.flatnonzero(row_sums == 0)]
        raise ValueError(f"all-zero TF rows must be filtered upstream: {', '.join(empty)}")
    return mat


def _e_step(mat, gamma, expElogbeta, alpha):
    """Coordinate ascent on each document's gamma; returns new sufficient stats."""
    sstats = np.zeros_like(expElogbeta)
    for d in range(mat.shape[0]):
        start, end = mat.indptr[d], mat.indptr[d + 1]
        ids = mat.indices[start:end]
        cts = mat.data[start:end]
        gammad = gamma[d]
        expElogthetad = np.exp(_dirichlet_expectation(gammad))
        expElogbetad = expElogbeta[:, ids]
        phinorm = expElogthetad @ expElogbetad + 1e-100
        for _ in range(_INNER_MAX_ITER):
            last = gammad
            gammad = alpha + expElogthetad * ((cts / phinorm) @ expElogbetad.T)
            expElogthetad = np.exp(_dirichlet_expectation(gammad))
            phinorm = expElogthetad @ expElogbetad + 1e-100
            if np.mean(np.abs(gammad - last)) < _INNER_TOL:
                break
        gamma[d] = gammad
        sstats[:, ids] += np.outer(expElogthetad, cts / phinorm)
    sstats *= expElogbeta
    return sstats


def _bound(mat, gamma, lam, alpha, beta) -> float:
    """Evidence lower bound of the corpus under the variational posterior."""
    n_docs, _ = gamma.shape
    k, n_terms = lam.shape
    Elogtheta = _dirichlet_expectation(gamma)
    Elogbeta = _dirichlet_expectation(lam)

    score = 0.0
    for d in range(n_docs):
        start, end = mat.indptr[d], mat.indptr[d + 1]
        ids = mat.indices[start:end]
        cts = mat.data[start:end]
        log_phinorm = logsumexp(Elogtheta[d][:, np.newaxis] + Elogbeta[:, ids], axis=0)
        score += float(cts @ log_phinorm)

    # E[log p(theta | alpha)] - E[log q(theta | gamma)]
    score += float(np.sum((alpha - gamma) * Elogtheta))
    score += float(np.sum(gammaln(gamma)) - np.sum(gammaln(np.sum(gamma, axis=1))))
    score += n_docs * (gammaln(k * alpha) - k * gammaln(alpha))

    # E[log p(beta_topic | beta)] - E[log q(beta_topic | lambda)]
    score += float(np.sum((beta - lam) * Elogbeta))
    score += float(np.sum(gammaln(lam)) - np.sum(gammaln(np.sum(lam, axis=1))))
    score += k * (gammaln(n_terms * beta) - n_terms * gammaln(beta))
    return score


def fit_lda(tf: DocTermMatrix, config: LdaConfig) -> LdaModel:
    """Fit LDA on a term-count matrix.

    The topic-term parameters start from seeded Gamma(100, 0.01) noise and
    the per-document responsibilities start uniform, so identical inputs
    and seed give bitwise-identical output.  A model that hits ``max_iter``
    without meeting ``tol`` is returned with ``converged=False``.
    """
    mat = _validate_tf(tf)
    n_docs, n_terms = mat.shape
    if config.k > n_docs:
        raise ValueError(f"k={config.k} exceeds document count {n_docs}")

    alpha, beta = config.alpha, config.beta
    rng = np.random.default_rng(config.seed)
    lam = rng.gamma(100.0, 0.01, (config.k, n_terms))
    # Uniform starting responsibilities: every topic gets an equal share
    # of each document's mass.
    doc_lengths = np.asarray(mat.sum(axis=1)).ravel()
    gamma = alpha + np.tile(doc_lengths[:, np.newaxis] / config.k, (1, config.k))

    trace: list[float] = []
    converged = False
    for _ in range(config.max_iter):
        expElogbeta = np.exp(_dirichlet_expectation(lam))
        sstats = _e_step(mat, gamma, expElogbeta, alpha)
        lam = beta + sstats
        bound = _bound(mat, gamma, lam, alpha, beta)
        trace.append(bound)
        if len(trace) > 1:
            prev = trace[-2]
            if abs(bound - prev) <= config.tol * abs(prev):
                converged = True
                break

    return LdaModel(
        doc_topic=gamma / gamma.sum(axis=1, keepdims=True),
        topic_term=lam / lam.sum(axis=1, keepdims=True),
        elbo_trace=trace,
        config=config,
        converged=converged,
        gamma_=gamma,
        lambda_=lam,
    )


def lda_elbo(model: LdaModel, tf: DocTermMatrix) -> float:
    """Recompute the variational bound of a fitted model on a TF matrix."""
    mat = _validate_tf(tf)
    if model.gamma_.shape[0] != mat.shape[0] or model.lambda_.shape[1] != mat.shape[1]:
        raise ValueError(
            f"model shape ({model.gamma_.shape[0]}, {model.lambda_.shape[1]}) does not "
            f"match matrix shape {mat.shape}"
        )
    return _bound(mat, model.gamma_, model.lambda_, model.config.alpha, model.config.beta)
