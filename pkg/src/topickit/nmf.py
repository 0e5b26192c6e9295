"""Nonnegative matrix factorisation with NNDSVD initialisation.

Minimises half the squared Frobenius reconstruction error
``0.5 * ||X - W H||^2`` by the classic multiplicative updates

    W <- W * (X H^T) / (W H H^T + eps)
    H <- H * (W^T X) / (W^T W H + eps)

(the alternating form, each half-step using the freshly updated other
factor, which makes the objective non-increasing).  A small ``eps`` in
the denominators and a floor under the NNDSVD zeros keep the updates from
locking entries at exact zero.

Factor matrices are dense and the SVD behind NNDSVD is a deterministic
dense decomposition, sized for corpora of a few hundred to a few thousand
documents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .vectorize import DocTermMatrix

__all__ = ["NmfModel", "nndsvd_init", "nmf_objective", "fit_nmf"]

# Floor for update denominators and for NNDSVD's structural zeros;
# multiplicative updates cannot move an entry off exact zero.
_EPS = 1e-12


@dataclass
class NmfModel:
    doc_topic: np.ndarray  # (D, K), >= 0
    topic_term: np.ndarray  # (K, V), >= 0
    objective_trace: list[float]
    k: int
    seed: int
    converged: bool


def _as_2d(x) -> sp.csr_matrix | np.ndarray:
    if isinstance(x, DocTermMatrix):
        return x.values
    if sp.issparse(x):
        return x.tocsr()
    return np.asarray(x, dtype=np.float64)


def _check_nonnegative(mat, what: str) -> None:
    data = mat.data if sp.issparse(mat) else mat
    if data.size and (not np.all(np.isfinite(data)) or np.min(data) < 0):
        raise ValueError(f"{what} must be nonnegative and finite")


def nndsvd_init(x, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonnegative double SVD initialisation.

    Builds the factor pair from the k leading singular triplets: the
    leading triplet is taken with absolute values, and every later
    component keeps whichever sign section (positive or negative parts of
    the singular vector pair) carries more mass.  Structural zeros are
    floored at 1e-12 so later multiplicative updates can move them.
    """
    mat = _as_2d(x)
    _check_nonnegative(mat, "NNDSVD input")
    n_rows, n_cols = mat.shape
    if not 1 <= k <= min(n_rows, n_cols):
        raise ValueError(f"k={k} out of range for a {n_rows}x{n_cols} matrix")

    dense = mat.toarray() if sp.issparse(mat) else mat
    try:
        u, s, vt = np.linalg.svd(dense, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"SVD failed on degenerate input: {exc}") from exc

    w = np.zeros((n_rows, k))
    h = np.zeros((k, n_cols))
    w[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    h[0, :] = np.sqrt(s[0]) * np.abs(vt[0, :])

    # Singular values that are zero up to round-off carry no structure;
    # their components stay at the clamp floor.
    cutoff = s[0] * max(n_rows, n_cols) * np.finfo(np.float64).eps
    for j in range(1, k):
        if s[j] <= cutoff:
            continue
        uj, vj = u[:, j], vt[j, :]
        u_pos, v_pos = np.maximum(uj, 0), np.maximum(vj, 0)
        u_neg, v_neg = np.maximum(-uj, 0), np.maximum(-vj, 0)
        pos_mass = np.linalg.norm(u_pos) * np.linalg.norm(v_pos)
        neg_mass = np.linalg.norm(u_neg) * np.linalg.norm(v_neg)
        if pos_mass >= neg_mass:
            sect_u, sect_v, mass = u_pos, v_pos, pos_mass
        else:
            sect_u, sect_v, mass = u_neg, v_neg, neg_mass
        if mass > 0:
            scale = np.sqrt(s[j] * mass)
            w[:, j] = scale * sect_u / np.linalg.norm(sect_u)
            h[j, :] = scale * sect_v / np.linalg.norm(sect_v)

    return np.maximum(w, _EPS), np.maximum(h, _EPS)


def nmf_objective(x, doc_topic: np.ndarray, topic_term: np.ndarray) -> float:
    """Half the squared Frobenius norm of the reconstruction residual."""
    mat = _as_2d(x)
    if doc_topic.shape[0] != mat.shape[0] or topic_term.shape[1] != mat.shape[1] \
            or doc_topic.shape[1] != topic_term.shape[0]:
        raise ValueError(
            f"factor shapes {doc_topic.shape} x {topic_term.shape} do not match "
            f"matrix shape {mat.shape}"
        )
    dense = mat.toarray() if sp.issparse(mat) else mat
    resid = dense - doc_topic @ topic_term
    return 0.5 * float(np.sum(resid * resid))


def fit_nmf(
    x,
    k: int,
    max_iter: int = 300,
    tol: float = 1e-6,
    seed: int = 0,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> NmfModel:
    """Fit NMF by multiplicative updates from an NNDSVD start.

    The objective trace starts at the initial point and gains one entry
    per iteration; it is non-increasing.  Iteration stops when the
    relative objective change drops below ``tol`` or after ``max_iter``
    updates.  With the deterministic NNDSVD start the result does not
    depend on ``seed``; an explicit ``init=(doc_topic0, topic_term0)``
    overrides it.
    """
    mat = _as_2d(x)
    _check_nonnegative(mat, "NMF input")
    if init is None:
        w, h = nndsvd_init(mat, k)
    else:
        n_rows, n_cols = mat.shape
        if not 1 <= k <= min(n_rows, n_cols):
            raise ValueError(f"k={k} out of range for a {n_rows}x{n_cols} matrix")
        w, h = np.array(init[0], dtype=np.float64), np.array(init[1], dtype=np.float64)
        _check_nonnegative(w, "initial doc_topic")
        _check_nonnegative(h, "initial topic_term")

    trace = [nmf_objective(mat, w, h)]
    converged = False
    for iteration in range(max_iter):
        w = w * ((mat @ h.T) / (w @ (h @ h.T) + _EPS))
        h = h * (((mat.T @ w).T) / ((w.T @ w) @ h + _EPS))
        obj = nmf_objective(mat, w, h)
        if not (np.isfinite(obj) and np.all(np.isfinite(w)) and np.all(np.isfinite(h))):
            raise RuntimeError(f"NMF update produced NaN/Inf at iteration {iteration + 1}")
        prev = trace[-1]
        trace.append(obj)
        if abs(prev - obj) <= tol * max(prev, np.finfo(float).tiny):
            converged = True
            break

    return NmfModel(
        doc_topic=w,
        topic_term=h,
        objective_trace=trace,
        k=k,
        seed=seed,
        converged=converged,
    )
