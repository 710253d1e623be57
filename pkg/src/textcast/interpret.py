"""Interpretability reports: embedding neighborhoods and norms, signed lasso
coefficients, forest importance rankings, and selection-overlap counts.

When several independently trained embeddings are supplied (B runs), word-pair
distances and norms are averaged per word across runs — the matrices
themselves are never averaged, since each training ends in its own basis.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .errors import EmptyReportWarning, SpecError, ZeroNormError

__all__ = [
    "WordReport",
    "cosine_distance",
    "nearest_words",
    "norm_ranking",
    "lasso_word_effects",
    "rf_word_importance",
    "selection_overlap",
    "write_reports",
    "export_embeddings",
]


@dataclass(frozen=True)
class WordReport:
    """One table row: rank 0 marks the query word itself, -1 a probe row."""

    word: str
    score: float
    rank: int
    std: float = 0.0


def cosine_distance(w1, w2) -> float:
    """1 - cos(angle); in [0, 2]. Zero vectors have no direction."""
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    n1 = float(np.linalg.norm(w1))
    n2 = float(np.linalg.norm(w2))
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroNormError("cosine distance undefined for a zero vector")
    return 1.0 - float(w1 @ w2) / (n1 * n2)


def _as_embedding_list(embeddings) -> list:
    if isinstance(embeddings, np.ndarray):
        return [np.asarray(embeddings, dtype=np.float64)]
    return [np.asarray(e, dtype=np.float64) for e in embeddings]


def _word_rows(embs, vocab: Vocabulary) -> list:
    """Per-run (V, q) views over word rows 1..V, shape-checked."""
    rows = []
    for e in embs:
        if e.ndim != 2 or e.shape[0] != vocab.size + 1:
            raise SpecError(
                f"embedding shape {e.shape} does not match vocabulary of size {vocab.size}"
            )
        rows.append(e[1:])
    return rows


def _mean_std(table: np.ndarray):
    mean = table.mean(axis=0)
    std = table.std(axis=0, ddof=1) if table.shape[0] > 1 else np.zeros(table.shape[1])
    return mean, std


def nearest_words(word: str, embeddings, vocab: Vocabulary, k: int = 9, probes=()):
    """Closest words to ``word`` by (mean) cosine distance.

    Returns the query itself first at distance 0, then the k nearest other
    words with ranks 1..k, then one unranked report per probe word (rank -1).
    With B embeddings, score/std are the per-pair mean and sample std.
    """
    qid = vocab.id_of(word)
    rows = _word_rows(_as_embedding_list(embeddings), vocab)
    dist_runs = np.empty((len(rows), vocab.size))
    for b, E in enumerate(rows):
        norms = np.linalg.norm(E, axis=1)
        if np.any(norms == 0.0):
            raise ZeroNormError("embedding contains a zero word vector")
        q = E[qid - 1]
        dist_runs[b] = 1.0 - (E @ q) / (norms * norms[qid - 1])
    mean, std = _mean_std(dist_runs)

    others = [i for i in range(vocab.size) if i != qid - 1]
    others.sort(key=lambda i: (mean[i], vocab.words[i]))
    k = min(k, len(others))
    reports = [WordReport(word, 0.0, 0, 0.0)]
    for rank, i in enumerate(others[:k], start=1):
        reports.append(WordReport(vocab.words[i], float(mean[i]), rank, float(std[i])))
    for probe in probes:
        pid = vocab.id_of(probe)
        if pid == qid:
            continue
        reports.append(
            WordReport(probe, float(mean[pid - 1]), -1, float(std[pid - 1]))
        )
    return reports


def norm_ranking(embeddings, vocab: Vocabulary, k: int = 50):
    """Top-k words by (mean) Euclidean embedding norm, descending; the padding
    row is excluded. Ties break lexicographically."""
    rows = _word_rows(_as_embedding_list(embeddings), vocab)
    norm_runs = np.stack([np.linalg.norm(E, axis=1) for E in rows])
    mean, std = _mean_std(norm_runs)
    order = sorted(range(vocab.size), key=lambda i: (-mean[i], vocab.words[i]))
    k = min(k, vocab.size)
    return [
        WordReport(vocab.words[i], float(mean[i]), rank, float(std[i]))
        for rank, i in enumerate(order[:k], start=1)
    ]


def lasso_word_effects(model, vocab: Vocabulary, k: int = 50):
    """Top-k positive and top-k negative coefficients as two signed lists.

    Zero coefficients are omitted; an all-zero model emits EmptyReportWarning
    and returns two empty lists.
    """
    coef = np.asarray(model.coef_, dtype=np.float64)
    if coef.shape[0] != vocab.size:
        raise SpecError(
            f"model has {coef.shape[0]} coefficients for a vocabulary of {vocab.size}"
        )
    if not np.any(coef != 0.0):
        warnings.warn("all coefficients are zero; nothing to report", EmptyReportWarning)
        return [], []
    pos = sorted((i for i in range(vocab.size) if coef[i] > 0),
                 key=lambda i: (-coef[i], vocab.words[i]))
    neg = sorted((i for i in range(vocab.size) if coef[i] < 0),
                 key=lambda i: (coef[i], vocab.words[i]))
    mk = lambda idxs: [
        WordReport(vocab.words[i], float(coef[i]), rank)
        for rank, i in enumerate(idxs[:k], start=1)
    ]
    return mk(pos), mk(neg)


def rf_word_importance(importance_runs, vocab: Vocabulary, k: int = 50):
    """Top-k words by mean normalized OOB importance over B forests."""
    runs = [np.asarray(r, dtype=np.float64) for r in importance_runs]
    for r in runs:
        if r.shape != (vocab.size,):
            raise SpecError(
                f"importance length {r.shape} does not match vocabulary of size {vocab.size}"
            )
    mean, std = _mean_std(np.stack(runs))
    order = sorted(range(vocab.size), key=lambda i: (-mean[i], vocab.words[i]))
    k = min(k, vocab.size)
    return [
        WordReport(vocab.words[i], float(mean[i]), rank, float(std[i]))
        for rank, i in enumerate(order[:k], start=1)
    ]


def selection_overlap(list_rf, list_lasso, list_norm, top_k: int = 50) -> dict:
    """Cardinalities of all 7 regions of the 3-set Venn decomposition of the
    three top_k prefixes."""
    lists = [list(list_rf), list(list_lasso), list(list_norm)]
    for name, lst in zip(("rf", "lasso", "norm"), lists):
        if len(lst) < top_k:
            raise SpecError(f"{name} list has {len(lst)} entries; need {top_k}")
    A, B, C = (set(lst[:top_k]) for lst in lists)
    abc = len(A & B & C)
    ab = len(A & B) - abc
    ac = len(A & C) - abc
    bc = len(B & C) - abc
    return {
        "rf_only": len(A) - ab - ac - abc,
        "lasso_only": len(B) - ab - bc - abc,
        "norm_only": len(C) - ac - bc - abc,
        "rf_lasso": ab,
        "rf_norm": ac,
        "lasso_norm": bc,
        "all_three": abc,
    }


def write_reports(path, reports, score_name: str = "score") -> None:
    """Delimited-text export of a WordReport list."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "word", score_name, "std"])
        for r in reports:
            writer.writerow([r.rank, r.word, repr(r.score), repr(r.std)])


def export_embeddings(path, embeddings, vocab: Vocabulary) -> None:
    """Raw embedding matrices plus the word list, for external projection."""
    embs = _as_embedding_list(embeddings)
    payload = {f"embedding_{b}": e for b, e in enumerate(embs)}
    payload["words"] = np.array(vocab.words)  # unicode array, no pickling
    np.savez(path, **payload)
