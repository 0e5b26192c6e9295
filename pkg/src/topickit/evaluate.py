"""Model evaluation: argmax grouping, silhouettes, keyword match, decisiveness.

All functions are pure and deterministic: topic ties break to the lowest
index, term ranking ties break lexicographically, and every statistic can
be cross-checked by a naive reimplementation (the tests do exactly that).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .vectorize import DocTermMatrix, Vocabulary

__all__ = [
    "Assignment",
    "SilhouetteResult",
    "EvaluationReport",
    "argmax_assign",
    "silhouette",
    "top_keywords",
    "group_frequent_terms",
    "keyword_match_ratio",
    "decisiveness",
    "build_report",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assignment:
    """Hard entity-to-topic labels produced by the argmax rule."""

    entity_ids: tuple[str, ...]
    labels: np.ndarray  # int64 in [0, k)
    k: int


@dataclass(frozen=True)
class SilhouetteResult:
    per_sample: np.ndarray  # in [-1, 1]
    mean: float
    k: int
    distance: str


def argmax_assign(weights, ids) -> Assignment:
    """Assign each row to its highest-weight column (lowest index on ties)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.size == 0:
        raise ValueError("weights must be a non-empty 2-d matrix")
    if np.isnan(w).any():
        raise ValueError("weights contain NaN")
    ids = tuple(ids)
    if len(ids) != w.shape[0]:
        raise ValueError(f"{len(ids)} ids for {w.shape[0]} rows")
    return Assignment(entity_ids=ids, labels=np.argmax(w, axis=1), k=w.shape[1])


def silhouette(points, labels, metric: str = "euclidean") -> SilhouetteResult:
    """Per-sample silhouette coefficients ``(b - a) / max(a, b)``.

    ``a`` is the mean distance to the sample's own cluster (excluding
    itself), ``b`` the smallest mean distance to any other cluster.
    Samples in singleton clusters score 0, and the mean runs over all
    samples.  Requires at least two samples and two distinct labels.
    """
    if isinstance(labels, Assignment):
        k = labels.k
        label_arr = labels.labels
    else:
        label_arr = np.asarray(labels, dtype=np.int64)
        k = int(label_arr.max()) + 1 if label_arr.size else 0
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise ValueError(f"silhouette needs at least 2 samples, got {n}")
    if len(label_arr) != n:
        raise ValueError(f"{len(label_arr)} labels for {n} samples")
    uniq = np.unique(label_arr)
    if len(uniq) < 2:
        raise ValueError("silhouette is undefined for a single cluster")

    dist = cdist(pts, pts, metric=metric)
    onehot = (label_arr[:, np.newaxis] == uniq[np.newaxis, :]).astype(np.float64)
    cluster_sums = dist @ onehot  # (n, n_clusters)
    counts = onehot.sum(axis=0)
    own_pos = np.searchsorted(uniq, label_arr)

    per_sample = np.zeros(n)
    for i in range(n):
        own = own_pos[i]
        if counts[own] == 1:
            continue  # singleton cluster scores 0
        a = cluster_sums[i, own] / (counts[own] - 1)
        other_means = np.delete(cluster_sums[i] / counts, own)
        b = float(np.min(other_means))
        denom = max(a, b)
        if denom > 0:
            per_sample[i] = (b - a) / denom
    return SilhouetteResult(
        per_sample=per_sample,
        mean=float(per_sample.mean()),
        k=k,
        distance=metric,
    )


def _ranked_terms(weights_row: np.ndarray, vocab: Vocabulary, n: int) -> list[str]:
    terms = np.asarray(vocab.index_to_term)
    order = np.lexsort((terms, -weights_row))
    return [str(terms[i]) for i in order[:n]]


def top_keywords(topic_term, vocab: Vocabulary, n: int = 30) -> list[list[str]]:
    """The n highest-weight terms of each topic, ties lexicographic."""
    w = np.asarray(topic_term, dtype=np.float64)
    if n > w.shape[1] or n > len(vocab):
        raise ValueError(f"n={n} exceeds vocabulary size {len(vocab)}")
    return [_ranked_terms(w[t], vocab, n) for t in range(w.shape[0])]


def group_frequent_terms(
    tf: DocTermMatrix, assignment: Assignment, vocab: Vocabulary, n: int = 30
) -> list[list[str]]:
    """The n most frequent terms of each group's documents.

    Terms are ranked by total TF over the group's documents (ties
    lexicographic).  A group with no documents yields an empty list and a
    logged flag.
    """
    if tf.weighting != "tf":
        raise ValueError(f"group term counting requires TF weights, got {tf.weighting!r}")
    n_docs, n_terms = tf.shape
    if n > n_terms:
        raise ValueError(f"n={n} exceeds vocabulary size {n_terms}")
    if len(assignment.labels) != n_docs:
        raise ValueError(f"{len(assignment.labels)} labels for {n_docs} documents")

    groups: list[list[str]] = []
    for g in range(assignment.k):
        members = np.flatnonzero(assignment.labels == g)
        if len(members) == 0:
            logger.warning("group %d is empty; no frequent-term list", g)
            groups.append([])
            continue
        totals = np.asarray(tf.values[members].sum(axis=0)).ravel()
        groups.append(_ranked_terms(totals, vocab, n))
    return groups


def keyword_match_ratio(
    model_keywords: list[list[str]], group_terms: list[list[str]]
) -> tuple[list[float | None], float | None]:
    """Overlap fraction between model keywords and group frequent terms.

    Per topic: |intersection| / n.  Topics whose group list is empty get
    ``None`` and are excluded from the mean; the mean itself is ``None``
    when no topic has a defined ratio.
    """
    if len(model_keywords) != len(group_terms):
        raise ValueError(
            f"{len(model_keywords)} keyword lists vs {len(group_terms)} group lists"
        )
    ratios: list[float | None] = []
    for kw, gt in zip(model_keywords, group_terms):
        if not gt:
            ratios.append(None)
            continue
        if len(kw) != len(gt):
            raise ValueError(f"list length mismatch: {len(kw)} vs {len(gt)}")
        ratios.append(len(set(kw) & set(gt)) / len(kw))
    defined = [r for r in ratios if r is not None]
    return ratios, (sum(defined) / len(defined) if defined else None)


def decisiveness(doc_topic) -> float:
    """Mean per-row spread of the topic-weight matrix.

    Rows are L1-normalised first (so probability rows and unnormalised
    loadings are comparable), then the population standard deviation of
    each row is averaged.  Ranges from 0 (uniform rows) to
    sqrt(k-1)/k (one-hot rows).  Zero rows are skipped with a flag.
    """
    w = np.asarray(doc_topic, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 2:
        raise ValueError("decisiveness needs a 2-d matrix with at least 2 columns")
    l1 = np.sum(np.abs(w), axis=1)
    keep = l1 > 0
    if not np.all(keep):
        logger.warning("decisiveness: skipping %d all-zero row(s)", int(np.sum(~keep)))
    if not np.any(keep):
        raise ValueError("decisiveness is undefined: all rows are zero")
    normalised = w[keep] / l1[keep, np.newaxis]
    return float(np.mean(np.std(normalised, axis=1)))


@dataclass
class EvaluationReport:
    """Everything the protocol measures for one (method, K) cell."""

    method: str
    k: int
    silhouette_documents: SilhouetteResult | None
    silhouette_companies: SilhouetteResult | None
    keyword_match_per_topic: list[float | None]
    keyword_match_mean: float | None
    decisiveness: float | None
    topic_sizes: list[int]
    company_crosstab: dict[str, list[int]]  # company_id -> doc count per topic
    topic_keywords: list[list[str]]
    notices: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def _sig(x):
            return None if x is None else float(f"{x:.12g}")

        return {
            "method": self.method,
            "k": self.k,
            "silhouette_documents": None if self.silhouette_documents is None else {
                "mean": _sig(self.silhouette_documents.mean),
                "per_sample": [_sig(v) for v in self.silhouette_documents.per_sample],
                "distance": self.silhouette_documents.distance,
            },
            "silhouette_companies": None if self.silhouette_companies is None else {
                "mean": _sig(self.silhouette_companies.mean),
                "per_sample": [_sig(v) for v in self.silhouette_companies.per_sample],
                "distance": self.silhouette_companies.distance,
            },
            "keyword_match_per_topic": [_sig(r) for r in self.keyword_match_per_topic],
            "keyword_match_mean": _sig(self.keyword_match_mean),
            "decisiveness": _sig(self.decisiveness),
            "topic_sizes": self.topic_sizes,
            "company_crosstab": self.company_crosstab,
            "topic_keywords": self.topic_keywords,
            "notices": self.notices,
        }


def build_report(
    method: str,
    k: int,
    doc_topic: np.ndarray,
    topic_term: np.ndarray,
    tf: DocTermMatrix,
    vocab: Vocabulary,
    doc_companies: list[str],
    company_factor: np.ndarray | None = None,
    company_ids: tuple[str, ...] | None = None,
    n_keywords: int = 30,
) -> EvaluationReport:
    """Run the full evaluation protocol for one fitted model."""
    notices: list[str] = []
    assignment = argmax_assign(doc_topic, tf.doc_ids)

    sil_docs = None
    if k < 2:
        notices.append("silhouette skipped: K<2")
    elif len(np.unique(assignment.labels)) < 2:
        notices.append("silhouette skipped: all documents in one group")
    else:
        sil_docs = silhouette(doc_topic, assignment)

    sil_comp = None
    if company_factor is not None:
        comp_assignment = argmax_assign(
            company_factor, company_ids or [str(i) for i in range(len(company_factor))]
        )
        if k < 2:
            notices.append("company silhouette skipped: K<2")
        elif len(np.unique(comp_assignment.labels)) < 2:
            notices.append("company silhouette skipped: all companies in one group")
        else:
            sil_comp = silhouette(company_factor, comp_assignment)

    n_kw = min(n_keywords, tf.shape[1])
    if n_kw < n_keywords:
        notices.append(f"keyword lists truncated to vocabulary size {n_kw}")
    keywords = top_keywords(topic_term, vocab, n=n_kw)
    group_terms = group_frequent_terms(tf, assignment, vocab, n=n_kw)
    for g, terms in enumerate(group_terms):
        if not terms:
            notices.append(f"group {g} is empty; keyword ratio undefined")
    per_topic, mean_ratio = keyword_match_ratio(keywords, group_terms)

    dec = None
    if k < 2:
        notices.append("decisiveness skipped: K<2")
    else:
        dec = decisiveness(doc_topic)

    topic_sizes = np.bincount(assignment.labels, minlength=k).tolist()
    crosstab: dict[str, list[int]] = {}
    for company, label in zip(doc_companies, assignment.labels):
        crosstab.setdefault(company, [0] * k)[label] += 1

    return EvaluationReport(
        method=method,
        k=k,
        silhouette_documents=sil_docs,
        silhouette_companies=sil_comp,
        keyword_match_per_topic=per_topic,
        keyword_match_mean=mean_ratio,
        decisiveness=dec,
        topic_sizes=topic_sizes,
        company_crosstab=dict(sorted(crosstab.items())),
        topic_keywords=keywords,
        notices=notices,
    )
