"""Vocabulary construction and the three numeric corpus representations.

From a list of tokenized documents this module builds

* a term <-> index bijection with document frequencies,
* a sparse document x term count matrix (TF) and its TF-IDF weighting,
* a sparse document x company x term tensor whose company-axis sum
  reproduces the TF matrix exactly.

Everything here is deterministic: vocabulary order is total frequency
descending with lexicographic tie-break, and all sparse structures keep
their coordinates in canonical sorted order, so rebuilding from the same
corpus is byte-identical.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedDocument

__all__ = [
    "Vocabulary",
    "DocTermMatrix",
    "DocCompanyTermTensor",
    "build_vocabulary",
    "tf_matrix",
    "tfidf_matrix",
    "build_tensor",
    "write_sparse",
]


@dataclass(frozen=True)
class Vocabulary:
    """Term <-> dense index bijection with per-term document frequencies."""

    term_to_index: Mapping[str, int]
    index_to_term: tuple[str, ...]
    doc_freq: np.ndarray  # int64, doc_freq[i] >= 1

    def __len__(self) -> int:
        return len(self.index_to_term)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_index


@dataclass(frozen=True)
class DocTermMatrix:
    """Sparse document x term matrix tagged with its weighting scheme."""

    values: sp.csr_matrix  # (D, V), nonnegative
    weighting: str  # "tf" | "tfidf"
    doc_ids: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def toarray(self) -> np.ndarray:
        return self.values.toarray()


@dataclass(frozen=True)
class DocCompanyTermTensor:
    """Sparse coordinate-format document x company x term count tensor.

    Each document contributes nonzeros only in its own company slice, so
    nnz equals the TF matrix nnz.  Coordinates are kept sorted by
    (doc, company, term).  A dense (D*C*V) array is never allocated.
    """

    shape: tuple[int, int, int]  # (D, C, V)
    doc_idx: np.ndarray
    company_idx: np.ndarray
    term_idx: np.ndarray
    values: np.ndarray  # float64, integral counts
    company_index: Mapping[str, int]
    doc_ids: tuple[str, ...]
    company_ids: tuple[str, ...]

    @property
    def nnz(self) -> int:
        return len(self.values)

    def sum_over_companies(self) -> sp.csr_matrix:
        """Marginalise the company axis back to a (D, V) count matrix."""
        d, c, v = self.shape
        mat = sp.coo_matrix(
            (self.values, (self.doc_idx, self.term_idx)), shape=(d, v)
        )
        return mat.tocsr()


def build_vocabulary(docs: Iterable[TokenizedDocument], min_df: int = 1) -> Vocabulary:
    """Build the vocabulary over all documents.

    Terms seen in fewer than ``min_df`` documents are excluded.  Index
    order is total corpus frequency descending, ties broken by the term
    string, which keeps downstream keyword rankings reproducible.
    """
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    docs = list(docs)
    if not docs or all(d.is_empty for d in docs):
        raise ValueError("cannot build a vocabulary from an empty corpus")

    total = Counter()
    dfreq = Counter()
    for doc in docs:
        total.update(doc.tokens)
        dfreq.update(set(doc.tokens))

    kept = [t for t in total if dfreq[t] >= min_df]
    if not kept:
        raise ValueError(f"no term reaches min_df={min_df}")
    kept.sort(key=lambda t: (-total[t], t))

    term_to_index = {t: i for i, t in enumerate(kept)}
    doc_freq = np.array([dfreq[t] for t in kept], dtype=np.int64)
    return Vocabulary(term_to_index, tuple(kept), doc_freq)


def _count_rows(docs: list[TokenizedDocument], vocab: Vocabulary) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    t2i = vocab.term_to_index
    for doc in docs:
        counts = Counter(t2i[t] for t in doc.tokens if t in t2i)
        for idx in sorted(counts):
            indices.append(idx)
            data.append(float(counts[idx]))
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.array(data, dtype=np.float64),
         np.array(indices, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocab)),
    )
    return mat


def tf_matrix(docs: list[TokenizedDocument], vocab: Vocabulary) -> DocTermMatrix:
    """Raw term counts: entry (d, t) is the frequency of term t in doc d.

    Tokens not in the vocabulary are skipped, so with min_df=1 each row
    sums to the document's token count.
    """
    mat = _count_rows(docs, vocab)
    return DocTermMatrix(mat, "tf", tuple(d.doc_id for d in docs))


def tfidf_matrix(docs: list[TokenizedDocument], vocab: Vocabulary) -> DocTermMatrix:
    """TF-IDF weighting with smoothed idf and L2-normalised rows.

    idf(t) = ln((1 + D) / (1 + doc_freq(t))) + 1, applied to the raw
    counts, then each row is scaled to unit Euclidean norm (all-zero rows
    stay zero).
    """
    mat = _count_rows(docs, vocab)
    n_docs = mat.shape[0]
    idf = np.log((1.0 + n_docs) / (1.0 + vocab.doc_freq.astype(np.float64))) + 1.0
    mat = mat.multiply(idf[np.newaxis, :]).tocsr()
    norms = sp.linalg.norm(mat, axis=1)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    mat = sp.diags(scale) @ mat
    return DocTermMatrix(mat.tocsr(), "tfidf", tuple(d.doc_id for d in docs))


def build_tensor(
    docs: list[TokenizedDocument],
    vocab: Vocabulary,
    company_map: Mapping[str, str],
) -> DocCompanyTermTensor:
    """Stack each document's TF row into its company's slice of a 3-way tensor."""
    missing = [d.doc_id for d in docs if d.doc_id not in company_map]
    if missing:
        raise ValueError(f"document(s) without a company: {', '.join(missing)}")

    company_ids = tuple(sorted({company_map[d.doc_id] for d in docs}))
    company_index = {c: i for i, c in enumerate(company_ids)}

    tf = _count_rows(docs, vocab)
    coo = tf.tocoo()
    doc_idx = coo.row.astype(np.int64)
    term_idx = coo.col.astype(np.int64)
    doc_company = np.array(
        [company_index[company_map[d.doc_id]] for d in docs], dtype=np.int64
    )
    company_idx = doc_company[doc_idx]
    values = coo.data.astype(np.float64)

    order = np.lexsort((term_idx, company_idx, doc_idx))
    return DocCompanyTermTensor(
        shape=(len(docs), len(company_ids), len(vocab)),
        doc_idx=doc_idx[order],
        company_idx=company_idx[order],
        term_idx=term_idx[order],
        values=values[order],
        company_index=company_index,
        doc_ids=tuple(d.doc_id for d in docs),
        company_ids=company_ids,
    )


def write_sparse(fh: IO[str], obj: DocTermMatrix | DocCompanyTermTensor) -> None:
    """Write a matrix or tensor in the plain sparse text format.

    Header line ``dims D V`` (matrix) or ``dims D V C`` (tensor), then one
    ``row col value`` / ``row col slab value`` line per nonzero, sorted by
    index tuple.  Values are printed with 12 significant digits.
    """
    if isinstance(obj, DocTermMatrix):
        d, v = obj.shape
        fh.write(f"dims {d} {v}\n")
        coo = obj.values.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.12g}\n")
    else:
        d, c, v = obj.shape
        fh.write(f"dims {d} {v} {c}\n")
        order = np.lexsort((obj.company_idx, obj.term_idx, obj.doc_idx))
        for i in order:
            fh.write(
                f"{obj.doc_idx[i]} {obj.term_idx[i]} {obj.company_idx[i]} "
                f"{obj.values[i]:.12g}\n"
            )
