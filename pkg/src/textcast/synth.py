"""Synthetic (corpus, series) pairs with known word -> effect ground truth.

Each day draws content words whose presence follows a smooth annual cycle
(winter words peak mid-January, summer words in mid-July), one weekday word,
and a Poisson number of zero-effect noise words.  The target is

    y_t = base_level + sum of effects of the distinct words present + noise,

so calendar-correlated words are genuine predictors — the confound the text
models are supposed to exploit.  Effects are presence-based: repeating a word
inside one document does not stack.

With ``noise_std=None`` the noise level is calibrated from the realized
signal variance so the oracle predictor (true effects) attains R² of about
``target_r2``.
"""
from __future__ import annotations

import csv
import datetime as dt
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import RawDocument, save_documents
from .errors import SpecError
from .series import TimeSeries, save_series

__all__ = [
    "SynthCluster",
    "SynthSpec",
    "default_spec",
    "generate",
    "noise_words",
    "oracle_predict",
    "save_bundle",
    "load_ground_truth",
    "spec_to_dict",
    "spec_from_dict",
]

_KINDS = ("winter", "summer", "workday", "weekend", "noise")


@dataclass(frozen=True)
class SynthCluster:
    """Named word group with one additive per-word effect.

    kind controls how presence is sampled: "winter"/"summer" follow the
    annual cycle, "workday"/"weekend" map words to weekdays, "noise" words are
    drawn with replacement at a Poisson rate and must carry effect 0.
    """

    name: str
    kind: str
    effect: float
    words: tuple

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.kind not in _KINDS:
            raise SpecError(f"unknown cluster kind {self.kind!r}")
        if not np.isfinite(self.effect):
            raise SpecError("cluster effect must be finite")
        if self.kind == "noise" and self.effect != 0.0:
            raise SpecError("noise clusters must have effect 0")
        if self.kind == "workday" and len(self.words) != 5:
            raise SpecError("workday clusters need exactly 5 words (Mon..Fri)")
        if self.kind == "weekend" and len(self.words) != 2:
            raise SpecError("weekend clusters need exactly 2 words (Sat, Sun)")


def noise_words(n: int, prefix: str = "filler") -> tuple:
    """n distinct digit-free tokens (digits would not survive tokenization)."""
    suffixes = [c + v for c in "bcdfghjklmnpqrstvwxz" for v in "aeiou"]
    if n > len(suffixes):
        suffixes = [a + b for a in suffixes for b in suffixes]
    if n > len(suffixes):
        raise SpecError(f"cannot generate {n} noise words")
    return tuple(prefix + s for s in suffixes[:n])


def _default_clusters() -> tuple:
    return (
        SynthCluster("winter_up", "winter", 5.0,
                     ("frost", "snowfall", "icy", "freezing", "blizzard")),
        SynthCluster("summer_down", "summer", -5.0,
                     ("heatwave", "scorching", "sunshine", "sweltering", "humid")),
        SynthCluster("workday", "workday", 2.0,
                     ("monday", "tuesday", "wednesday", "thursday", "friday")),
        SynthCluster("weekend", "weekend", -2.0, ("saturday", "sunday")),
        SynthCluster("noise", "noise", 0.0, noise_words(83)),
    )


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; the default is a 100-word vocabulary over 2000
    days: 5 up-words (+5), 5 down-words (-5), 7 weekday words (+2/-2) and 83
    noise words, with noise calibrated for oracle R² of about 0.9."""

    n_days: int = 2000
    start: dt.date = dt.date(2012, 1, 1)
    base_level: float = 100.0
    clusters: tuple = field(default_factory=_default_clusters)
    noise_std: float | None = None
    target_r2: float = 0.9
    presence_base: float = 0.05  # off-season presence probability
    presence_amp: float = 0.60  # seasonal presence swing
    noise_word_mean: float = 12.0  # Poisson rate of noise tokens per day
    peak_doy: int = 15  # day-of-year where winter intensity peaks

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        if self.n_days < 1:
            raise SpecError("n_days must be >= 1")
        if not 0.0 < self.target_r2 < 1.0:
            raise SpecError("target_r2 must be in (0, 1)")
        if not (0.0 <= self.presence_base and self.presence_base + self.presence_amp <= 1.0):
            raise SpecError("presence probabilities must stay in [0, 1]")
        seen: set = set()
        for cluster in self.clusters:
            overlap = seen.intersection(cluster.words)
            if overlap:
                raise SpecError(f"cluster vocabularies overlap: {sorted(overlap)[:5]}")
            seen.update(cluster.words)

    def ground_truth(self) -> dict:
        """word -> additive effect, noise words included at 0.0."""
        return {w: c.effect for c in self.clusters for w in c.words}


def default_spec(**overrides) -> SynthSpec:
    return replace(SynthSpec(), **overrides) if overrides else SynthSpec()


def _winter_intensity(date: dt.date, peak_doy: int) -> float:
    doy = date.timetuple().tm_yday
    return 0.5 * (1.0 + np.cos(2.0 * np.pi * (doy - peak_doy) / 365.25))


def generate(spec: SynthSpec, seed: int = 0):
    """Draw one dataset; returns (documents, series, ground_truth).

    Deterministic given (spec, seed); documents and series are aligned by
    date and use the formats the corpus and series loaders consume.
    """
    rng = np.random.default_rng(seed)
    truth = spec.ground_truth()
    dates = [spec.start + dt.timedelta(days=i) for i in range(spec.n_days)]
    docs = []
    signal = np.empty(spec.n_days)
    for i, date in enumerate(dates):
        wintry = _winter_intensity(date, spec.peak_doy)
        dow = date.weekday()
        tokens: list = []
        for cluster in spec.clusters:
            if cluster.kind == "winter" or cluster.kind == "summer":
                p = spec.presence_base + spec.presence_amp * (
                    wintry if cluster.kind == "winter" else 1.0 - wintry
                )
                for w in cluster.words:
                    if rng.random() < p:
                        tokens.append(w)
            elif cluster.kind == "workday":
                if dow < 5:
                    tokens.append(cluster.words[dow])
            elif cluster.kind == "weekend":
                if dow >= 5:
                    tokens.append(cluster.words[dow - 5])
            else:  # noise
                m = int(rng.poisson(spec.noise_word_mean))
                if m > 0 and cluster.words:
                    drawn = rng.choice(len(cluster.words), size=m)
                    tokens.extend(cluster.words[j] for j in drawn)
        signal[i] = spec.base_level + sum(truth[w] for w in set(tokens))
        order = rng.permutation(len(tokens))
        docs.append(RawDocument(date, " ".join(tokens[j] for j in order)))

    noise_std = spec.noise_std
    if noise_std is None:
        var = float(signal.var())
        r = spec.target_r2
        noise_std = float(np.sqrt(var * (1.0 - r) / r)) if var > 0 else 0.0
    values = signal + (rng.normal(0.0, noise_std, spec.n_days) if noise_std > 0 else 0.0)
    series = TimeSeries(tuple(dates), values, unit="synthetic")
    return docs, series, truth


def oracle_predict(tokens, ground_truth: dict, base: float) -> float:
    """Ceiling predictor: base plus the effects of the distinct known words."""
    return float(base + sum(ground_truth.get(w, 0.0) for w in set(tokens)))


def save_bundle(out_dir, docs, series: TimeSeries, ground_truth: dict) -> dict:
    """Write documents.jsonl, series.csv and ground_truth.csv; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "documents": os.path.join(out_dir, "documents.jsonl"),
        "series": os.path.join(out_dir, "series.csv"),
        "ground_truth": os.path.join(out_dir, "ground_truth.csv"),
    }
    save_documents(paths["documents"], docs)
    save_series(paths["series"], series)
    with open(paths["ground_truth"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "effect"])
        for w in sorted(ground_truth):
            writer.writerow([w, repr(float(ground_truth[w]))])
    return paths


def load_ground_truth(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["word"]: float(row["effect"]) for row in csv.DictReader(fh)}


def spec_to_dict(spec: SynthSpec) -> dict:
    return {
        "n_days": spec.n_days,
        "start": spec.start.isoformat(),
        "base_level": spec.base_level,
        "noise_std": spec.noise_std,
        "target_r2": spec.target_r2,
        "presence_base": spec.presence_base,
        "presence_amp": spec.presence_amp,
        "noise_word_mean": spec.noise_word_mean,
        "peak_doy": spec.peak_doy,
        "clusters": [
            {"name": c.name, "kind": c.kind, "effect": c.effect, "words": list(c.words)}
            for c in spec.clusters
        ],
    }


def spec_from_dict(data: dict) -> SynthSpec:
    """Inverse of :func:`spec_to_dict`; unknown keys raise SpecError."""
    data = dict(data)
    known = set(spec_to_dict(SynthSpec()))
    unknown = set(data) - known
    if unknown:
        raise SpecError(f"unknown synth spec keys: {sorted(unknown)}")
    if "start" in data:
        data["start"] = dt.date.fromisoformat(data["start"])
    if "clusters" in data:
        data["clusters"] = tuple(
            SynthCluster(c["name"], c["kind"], float(c["effect"]), tuple(c["words"]))
            for c in data["clusters"]
        )
    return SynthSpec(**data)
