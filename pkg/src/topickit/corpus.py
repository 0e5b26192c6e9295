"""Corpus loading and the three-stage text preprocessing pipeline.

Documents come in as raw text with company metadata and leave as ordered
lists of stems, produced by tokenisation, stop-word removal and Porter
stemming, in that order.  Stop-word removal runs before stemming, so
inflected forms of stop-words ("reporting") survive the filter; this is
deliberate and matched by the tests.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .porter import stem

__all__ = [
    "CorpusError",
    "RawDocument",
    "TokenizedDocument",
    "StopwordList",
    "EXTRA_STOPWORDS",
    "load_base_stopwords",
    "load_corpus",
    "tokenize",
    "remove_stopwords",
    "stem",
    "preprocess",
    "preprocess_corpus",
]

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Raised when a corpus cannot be loaded or violates its invariants."""


@dataclass(frozen=True)
class RawDocument:
    """One report with its company metadata."""

    doc_id: str
    company_id: str
    text: str
    year: int | None = None
    report_type: str | None = None
    category: str | None = None

    def __post_init__(self):
        if not self.doc_id:
            raise CorpusError("doc_id must be non-empty")
        if not self.company_id:
            raise CorpusError(f"document {self.doc_id!r}: company_id must be non-empty")
        if not self.text.strip():
            raise CorpusError(f"document {self.doc_id!r}: text is empty after trim")


@dataclass(frozen=True)
class TokenizedDocument:
    """The cleaned token stream of one document: ordered lowercase stems."""

    doc_id: str
    tokens: tuple[str, ...]

    @property
    def is_empty(self) -> bool:
        return len(self.tokens) == 0


# Domain-specific terms removed in addition to the base English list.
EXTRA_STOPWORDS = frozenset({
    "appendix", "area", "australia", "fax", "figure", "ltd", "map",
    "page", "phone", "project", "report", "year", "within",
})


def load_base_stopwords() -> frozenset[str]:
    """Read the vendored 179-word English stop-word list."""
    data = resources.files("topickit.data").joinpath("stopwords_en.txt").read_text("utf-8")
    words = frozenset(line.strip() for line in data.splitlines() if line.strip())
    return words


@dataclass(frozen=True)
class StopwordList:
    """Base English stop-words plus the configurable domain extras."""

    base: frozenset[str] = field(default_factory=load_base_stopwords)
    extra: frozenset[str] = EXTRA_STOPWORDS

    def __contains__(self, token: str) -> bool:
        return token in self.base or token in self.extra

    @classmethod
    def with_extra(cls, extra_terms) -> "StopwordList":
        """Default base list with additional lowercase extras appended."""
        return cls(extra=EXTRA_STOPWORDS | frozenset(t.lower() for t in extra_terms))


# Maximal runs of Unicode letters or digits; underscores and punctuation split.
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Split text into lowercase alphabetic tokens of length >= 3.

    Tokens are maximal runs of word characters; any run containing a digit
    is discarded whole (so "2nd" contributes nothing rather than "nd"),
    punctuation and other special characters never appear in the output,
    and surviving tokens are lowercased before the length filter.
    """
    out = []
    for match in _WORD_RE.finditer(text):
        token = match.group()
        if any(ch.isdigit() for ch in token):
            continue
        token = token.lower()
        if len(token) >= 3:
            out.append(token)
    return out


def remove_stopwords(tokens: list[str], stops: StopwordList) -> list[str]:
    """Drop stop-list members, preserving the order of the survivors."""
    return [t for t in tokens if t not in stops]


def preprocess(doc: RawDocument, stops: StopwordList | None = None) -> TokenizedDocument:
    """Run tokenise -> stop-word removal -> stemming on one document.

    A document whose token list ends up empty is returned as-is (callers
    flag it); it is never silently dropped here.
    """
    if stops is None:
        stops = StopwordList()
    tokens = tuple(stem(t) for t in remove_stopwords(tokenize(doc.text), stops))
    return TokenizedDocument(doc_id=doc.doc_id, tokens=tokens)


def preprocess_corpus(
    docs: list[RawDocument], stops: StopwordList | None = None
) -> tuple[list[TokenizedDocument], list[str]]:
    """Preprocess every document in input order.

    Returns the tokenized documents (including empty ones) plus the ids of
    documents that became empty, so run reports can reconcile counts.
    """
    if stops is None:
        stops = StopwordList()
    tokenized = [preprocess(d, stops) for d in docs]
    empty_ids = [t.doc_id for t in tokenized if t.is_empty]
    if empty_ids:
        logger.warning(
            "%d document(s) empty after preprocessing: %s",
            len(empty_ids), ", ".join(empty_ids),
        )
    return tokenized, empty_ids


def load_corpus(path: str | Path, format: str = "jsonl") -> list[RawDocument]:
    """Load raw documents from disk.

    ``jsonl``: one JSON object per line with required keys doc_id,
    company_id, text and optional year, report_type, category.
    ``text-dir``: every ``*.txt`` file in the directory is one document
    (doc_id = file stem) and a sidecar ``manifest.csv`` with columns
    doc_id, company_id supplies the metadata.

    Duplicate doc_ids and malformed records are rejected with the
    offending location named.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if format == "jsonl":
        docs = _load_jsonl(path)
    elif format == "text-dir":
        docs = _load_text_dir(path)
    else:
        raise CorpusError(f"unknown corpus format: {format!r}")

    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
    if not docs:
        warnings.warn(f"corpus at {path} is empty", stacklevel=2)
    return docs


def _coerce_year(value, where: str) -> int | None:
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise CorpusError(f"{where}: year must be an integer, got {value!r}") from None


def _load_jsonl(path: Path) -> list[RawDocument]:
    if not path.is_file():
        raise CorpusError(f"not a file: {path}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise CorpusError(f"{where}: record is not an object")
            missing = [k for k in ("doc_id", "company_id", "text") if k not in record]
            if missing:
                raise CorpusError(f"{where}: missing required key(s) {', '.join(missing)}")
            try:
                doc = RawDocument(
                    doc_id=str(record["doc_id"]),
                    company_id=str(record["company_id"]),
                    text=str(record["text"]),
                    year=_coerce_year(record.get("year"), where),
                    report_type=record.get("report_type"),
                    category=record.get("category"),
                )
            except CorpusError as exc:
                raise CorpusError(f"{where}: {exc}") from None
            docs.append(doc)
    return docs


def _load_text_dir(path: Path) -> list[RawDocument]:
    if not path.is_dir():
        raise CorpusError(f"not a directory: {path}")
    manifest = path / "manifest.csv"
    if not manifest.is_file():
        raise CorpusError(f"text-dir corpus requires a sidecar manifest: {manifest}")
    meta: dict[str, dict] = {}
    with open(manifest, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"doc_id", "company_id"} <= set(reader.fieldnames):
            raise CorpusError(f"{manifest.name}: header must include doc_id, company_id")
        for row in reader:
            meta[row["doc_id"]] = row

    docs = []
    for txt in sorted(path.glob("*.txt")):
        doc_id = txt.stem
        if doc_id not in meta:
            raise CorpusError(f"{txt.name}: no manifest row for doc_id {doc_id!r}")
        row = meta[doc_id]
        docs.append(RawDocument(
            doc_id=doc_id,
            company_id=row["company_id"],
            text=txt.read_text("utf-8"),
            year=_coerce_year(row.get("year") or None, txt.name),
            report_type=row.get("report_type") or None,
            category=row.get("category") or None,
        ))
    return docs
