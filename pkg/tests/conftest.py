import numpy as np
import pytest

from topickit.corpus import TokenizedDocument


def toks(doc_id, tokens):
    return TokenizedDocument(doc_id=doc_id, tokens=tuple(tokens))


def random_tokenized(rng, n_docs=8, vocab_size=12, max_len=30, prefix="w"):
    """Random already-tokenized documents over a small synthetic vocabulary."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    terms = [f"{prefix}{letters[i // 26]}{letters[i % 26]}" for i in range(vocab_size)]
    docs = []
    for d in range(n_docs):
        n = int(rng.integers(1, max_len))
        tokens = rng.choice(terms, size=n).tolist()
        docs.append(toks(f"d{d:03d}", tokens))
    return docs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
