"""TF-IDF document-term matrix.

Weighting: x_{d,w} = (count(w, d) / len(d)) * ln(N / (df(w) + 1)) with natural
log, where N and df come from the fitted corpus.  The +1 is kept literally, so
idf is 0 for a word in N-1 documents and negative for one in all N; no
flooring is applied (the 40% document-frequency filter makes both cases rare
in practice).

Length convention: for fitted (training) documents len(d) counts in-vocabulary
tokens only; at transform (inference) time len(d) counts all tokens, so
out-of-vocabulary words dilute the weights without contributing entries.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Vocabulary
from .errors import SpecError

__all__ = ["TfIdfMatrix", "TfidfEncoder", "fit_tfidf", "transform_tfidf", "export_matrix"]


@dataclass(frozen=True)
class TfIdfMatrix:
    """Fitted document-term weights plus the statistics needed to encode new docs."""

    rows: np.ndarray  # (N, V)
    idf: np.ndarray  # (V,)
    n_docs: int
    vocab: Vocabulary


class TfidfEncoder(BaseEstimator, TransformerMixin):
    """Document-term weighting over a fixed vocabulary.

    ``fit`` learns idf from the given corpus; ``fit_transform`` encodes that
    corpus with training length normalization and ``transform`` encodes new
    documents with inference length normalization (see module docstring).
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def fit(self, X, y=None):
        """Learn idf factors from a corpus of token lists."""
        docs = list(X)
        if not docs:
            raise SpecError("cannot fit tf-idf on an empty corpus")
        n = len(docs)
        df = np.zeros(self.vocab.size, dtype=np.float64)
        index = self.vocab.index
        for tokens in docs:
            for w in set(tokens):
                i = index.get(w)
                if i is not None:
                    df[i - 1] += 1
        self.idf_ = np.log(n / (df + 1.0))
        self.n_docs_ = n
        return self

    def fit_transform(self, X, y=None):
        """Fit on the corpus and return its (N, V) matrix (training lengths)."""
        docs = [list(tokens) for tokens in X]
        self.fit(docs)
        return self._encode(docs, in_vocab_length=True)

    def transform(self, X):
        """Encode documents with the fitted idf (inference lengths)."""
        self._check_fitted()
        return self._encode([list(tokens) for tokens in X], in_vocab_length=False)

    def transform_one(self, tokens) -> np.ndarray:
        """Single-document convenience wrapper around :meth:`transform`."""
        return self.transform([tokens])[0]

    def matrix(self, rows: np.ndarray) -> TfIdfMatrix:
        """Bundle encoded rows with the fitted statistics."""
        self._check_fitted()
        return TfIdfMatrix(rows, self.idf_.copy(), self.n_docs_, self.vocab)

    def _check_fitted(self):
        if not hasattr(self, "idf_"):
            raise SpecError("encoder not fitted")

    def _encode(self, docs, in_vocab_length: bool) -> np.ndarray:
        index = self.vocab.index
        out = np.zeros((len(docs), self.vocab.size), dtype=np.float64)
        for d, tokens in enumerate(docs):
            counts = Counter(t for t in tokens if t in index)
            length = sum(counts.values()) if in_vocab_length else len(tokens)
            if length == 0:
                continue
            for w, c in counts.items():
                j = index[w] - 1
                out[d, j] = (c / length) * self.idf_[j]
        return out


def fit_tfidf(tokenized_docs, vocab: Vocabulary) -> TfIdfMatrix:
    """One-shot fit over training documents; see :class:`TfidfEncoder`."""
    enc = TfidfEncoder(vocab)
    rows = enc.fit_transform(tokenized_docs)
    return enc.matrix(rows)


def transform_tfidf(tokens, fitted: TfIdfMatrix) -> np.ndarray:
    """Encode one new document against a fitted matrix's statistics."""
    index = fitted.vocab.index
    out = np.zeros(fitted.vocab.size, dtype=np.float64)
    tokens = list(tokens)
    if not tokens:
        return out
    counts = Counter(t for t in tokens if t in index)
    length = len(tokens)
    for w, c in counts.items():
        j = index[w] - 1
        out[j] = (c / length) * fitted.idf[j]
    return out


def export_matrix(path, rows: np.ndarray, vocab: Vocabulary, dates=None) -> None:
    """Write an encoded matrix as delimited text with a word header row."""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[1] != vocab.size:
        raise SpecError("rows must be (n_docs, vocab.size)")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *vocab.words])
        for i in range(rows.shape[0]):
            label = dates[i].isoformat() if dates is not None else str(i)
            writer.writerow([label, *(repr(float(v)) for v in rows[i])])
