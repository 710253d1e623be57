"""Dated text documents: ingestion, preprocessing, vocabulary, id sequences.

Preprocessing lowercases, keeps only runs of letters (accented letters count,
digits and punctuation split tokens) and drops stopwords; no stemming.  The
vocabulary maps words to ids 1..V, with 0 reserved for padding and unknown
words; words are admitted when they appear at least ``min_count`` times in
total and in at most ``max_doc_frac`` of the training documents.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DuplicateError, EmptyVocabError, ParseError, SpecError

__all__ = [
    "RawDocument",
    "Vocabulary",
    "TokenSequence",
    "PaddedBatch",
    "load_documents",
    "save_documents",
    "load_stopwords",
    "preprocess",
    "build_vocabulary",
    "restrict_vocabulary",
    "to_ids",
    "pad_batch",
    "max_sequence_length",
    "corpus_stats",
]

# runs of unicode letters; \w minus digits and underscore
_TOKEN = re.compile(r"[^\W\d_]+", re.UNICODE)


@dataclass(frozen=True)
class RawDocument:
    date: dt.date
    text: str


@dataclass(frozen=True)
class Vocabulary:
    """Word/id bijection with corpus frequency statistics.

    ``words[i]`` has id ``i + 1``; id 0 is the padding/unknown slot.
    """

    words: tuple
    total_count: dict
    doc_count: dict
    n_docs: int

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "index", {w: i + 1 for i, w in enumerate(self.words)})

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def id_of(self, word: str) -> int:
        try:
            return self.index[word]
        except KeyError:
            raise LookupError(f"word not in vocabulary: {word!r}") from None

    def word_of(self, idx: int) -> str:
        if not 1 <= idx <= len(self.words):
            raise LookupError(f"id out of range 1..{len(self.words)}: {idx}")
        return self.words[idx - 1]

    def content_hash(self) -> str:
        """Stable digest of the ordered word list (for checkpoint compatibility)."""
        joined = "\n".join(self.words).encode("utf-8")
        return hashlib.sha256(joined).hexdigest()


@dataclass(frozen=True)
class TokenSequence:
    """Integer-encoded document; ids lie in 0..V."""

    ids: np.ndarray
    date: dt.date | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))

    @property
    def length(self) -> int:
        return int(self.ids.shape[0])


@dataclass(frozen=True)
class PaddedBatch:
    """Fixed-width id matrix: each row is a sequence padded with zeros to S."""

    rows: np.ndarray  # (n, S) int64
    S: int


def load_documents(path) -> list:
    """Read line-delimited JSON records with ``date`` and ``text`` fields.

    Returns documents sorted by date; duplicate dates raise
    :class:`DuplicateError`, malformed lines :class:`ParseError`.
    """
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                date = dt.date.fromisoformat(str(record["date"])[:10])
                text = str(record["text"])
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if date in seen:
                raise DuplicateError(f"{path}:{lineno}: duplicate date {date}")
            seen.add(date)
            docs.append(RawDocument(date, text))
    docs.sort(key=lambda d: d.date)
    return docs


def save_documents(path, docs) -> None:
    """Inverse of :func:`load_documents` (one JSON object per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"date": doc.date.isoformat(), "text": doc.text},
                                ensure_ascii=False))
            fh.write("\n")


def load_stopwords(source) -> frozenset:
    """Stopword set from a packaged language tag ("en", "fr") or a file path.

    Files hold one lowercase word per line; blank lines and ``#`` comments are
    skipped.
    """
    if source in ("en", "fr"):
        text = resources.files("textcast").joinpath(f"data/stopwords_{source}.txt").read_text("utf-8")
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def preprocess(text: str, stopwords=frozenset()) -> list:
    """Lowercase, keep letter runs only, drop stopwords."""
    tokens = _TOKEN.findall(unicodedata.normalize("NFC", text).lower())
    if stopwords:
        return [t for t in tokens if t not in stopwords]
    return tokens


def build_vocabulary(tokenized_docs, min_count: int = 7, max_doc_frac: float = 0.40) -> Vocabulary:
    """Frequency-filtered vocabulary over the training documents.

    Keeps words with total count >= min_count appearing in <= max_doc_frac of
    documents.  Ids are assigned by descending total count, ties
    lexicographic, so rebuilding from the same corpus is reproducible.
    """
    if not tokenized_docs:
        raise SpecError("need at least one document")
    total: dict = {}
    docs_with: dict = {}
    for tokens in tokenized_docs:
        for t in tokens:
            total[t] = total.get(t, 0) + 1
        for t in set(tokens):
            docs_with[t] = docs_with.get(t, 0) + 1
    n_docs = len(tokenized_docs)
    kept = [
        w
        for w in total
        if total[w] >= min_count and docs_with[w] / n_docs <= max_doc_frac
    ]
    if not kept:
        raise EmptyVocabError(
            f"filters (min_count={min_count}, max_doc_frac={max_doc_frac}) removed every word"
        )
    kept.sort(key=lambda w: (-total[w], w))
    return Vocabulary(
        words=tuple(kept),
        total_count={w: total[w] for w in kept},
        doc_count={w: docs_with[w] for w in kept},
        n_docs=n_docs,
    )


def restrict_vocabulary(vocab: Vocabulary, words) -> Vocabulary:
    """Sub-vocabulary over ``words``, re-indexed by the same determinism rule
    (descending total count, ties lexicographic)."""
    words = set(words)
    unknown = words - set(vocab.words)
    if unknown:
        raise SpecError(f"words not in vocabulary: {sorted(unknown)[:5]}")
    kept = sorted(words, key=lambda w: (-vocab.total_count[w], w))
    return Vocabulary(
        words=tuple(kept),
        total_count={w: vocab.total_count[w] for w in kept},
        doc_count={w: vocab.doc_count[w] for w in kept},
        n_docs=vocab.n_docs,
    )


def to_ids(tokens, vocab: Vocabulary, training: bool = False, date: dt.date | None = None) -> TokenSequence:
    """Integer-encode one document.

    Training mode drops out-of-vocabulary tokens; inference mode maps them to
    the unknown id 0 in place.
    """
    index = vocab.index
    if training:
        ids = [index[t] for t in tokens if t in index]
    else:
        ids = [index.get(t, 0) for t in tokens]
    return TokenSequence(np.array(ids, dtype=np.int64), date)


def max_sequence_length(sequences) -> int:
    """Largest id-sequence length (the padding width S fitted on training data)."""
    return max((seq.length for seq in sequences), default=0)


def pad_batch(sequences, S: int) -> PaddedBatch:
    """Stack sequences into an (n, S) id matrix, zero-padded on the right.

    Sequences longer than S (possible at inference) keep their first S ids.
    """
    if S < 1:
        raise SpecError("padding width S must be >= 1")
    rows = np.zeros((len(sequences), S), dtype=np.int64)
    for i, seq in enumerate(sequences):
        ids = seq.ids if isinstance(seq, TokenSequence) else np.asarray(seq, dtype=np.int64)
        m = min(len(ids), S)
        rows[i, :m] = ids[:m]
    return PaddedBatch(rows, S)


def corpus_stats(tokenized_docs, vocab: Vocabulary | None = None) -> dict:
    """Descriptive statistics of a preprocessed corpus.

    ``vocab_size_unfiltered`` counts distinct tokens before frequency filters;
    ``vocab_size`` is the filtered size when a vocabulary is supplied.
    Lengths are post-preprocessing token counts.
    """
    if not tokenized_docs:
        raise SpecError("need at least one document")
    lengths = np.array([len(t) for t in tokenized_docs], dtype=np.float64)
    distinct = set()
    for tokens in tokenized_docs:
        distinct.update(tokens)
    stats = {
        "n_docs": len(tokenized_docs),
        "vocab_size_unfiltered": len(distinct),
        "max_length": int(lengths.max()),
        "mean_length": float(lengths.mean()),
    }
    if vocab is not None:
        stats["vocab_size"] = vocab.size
    return stats
