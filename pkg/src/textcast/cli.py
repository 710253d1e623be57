"""Command-line entry points.

Four subcommands cover the workflow:

* ``textcast synth`` — write a synthetic document/series bundle with known
  ground truth, for smoke tests and calibration studies.
* ``textcast ingest`` — validate and normalize a raw documents + series pair
  into a bundle directory (fails loudly on gaps, duplicates or parse errors).
* ``textcast run`` — execute a full experiment config; writes metrics,
  predictions, leaderboards, selection and interpretability artifacts plus a
  manifest.
* ``textcast interpret`` — post-hoc reports from a finished run directory:
  nearest-neighbour tables in embedding space and ranking-overlap counts.

Exit codes: 0 success, 2 config/usage errors, 1 runtime failures (the failing
pipeline stage is named on stderr when known).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, corpus, interpret, runner, series as tseries, synth
from .errors import ConfigError, TextcastError


def _fail(exc: BaseException) -> int:
    stage = getattr(exc, "stage", None)
    where = f" [stage: {stage}]" if stage else ""
    print(f"error{where}: {exc}", file=sys.stderr)
    return 2 if isinstance(exc, ConfigError) else 1


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = synth.spec_from_dict(json.load(fh))
    else:
        spec = synth.default_spec()
    docs, ts, truth = synth.generate(spec, seed=args.seed)
    synth.save_bundle(args.out, docs, ts, truth)
    print(f"wrote {len(docs)} documents, series and ground truth to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(args) -> int:
    documents = corpus.load_documents(args.documents)
    ts = tseries.load_series(args.series, args.date_field, args.value_field, args.unit)
    doc_dates = {d.date for d in documents}
    shared = [d for d in ts.dates if d in doc_dates]
    if not shared:
        raise ConfigError("documents and series share no dates")
    stopwords = corpus.load_stopwords(args.stopwords) if args.stopwords else frozenset()
    tokens = [corpus.preprocess(doc.text, stopwords) for doc in documents
              if doc.date in set(shared)]
    stats = corpus.corpus_stats(tokens)
    os.makedirs(args.out, exist_ok=True)
    corpus.save_documents(os.path.join(args.out, "documents.jsonl"), documents)
    tseries.save_series(os.path.join(args.out, "series.csv"), ts)
    stats["n_shared_dates"] = len(shared)
    with open(os.path.join(args.out, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
    print(f"normalized bundle in {args.out}: {len(documents)} documents, "
          f"{len(ts)} series points, {len(shared)} shared dates")
    return 0


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    manifest = runner.run_experiment(config, args.out, seed=args.seed, jobs=args.jobs)
    print(f"run complete in {manifest['timing_seconds']}s; "
          f"artifacts in {args.out} (see manifest.json)")
    metrics_path = os.path.join(args.out, "metrics.csv")
    with open(metrics_path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            print(f"  {row['family']:>16}: RMSE {float(row['rmse_mean']):.4g} "
                  f"± {float(row['rmse_std']):.2g}, R2 {float(row['r2_mean']):.4f}")
    return 0


# ---------------------------------------------------------------------------
# interpret


def _load_embeddings(run_dir):
    path = os.path.join(run_dir, "embeddings.npz")
    if not os.path.exists(path):
        raise ConfigError(f"{path} not found; run with a gru family or "
                          "embedding_analysis.enabled first")
    with np.load(path) as data:
        words = [str(w) for w in data["words"]]
        runs = []
        while f"embedding_{len(runs)}" in data:
            runs.append(data[f"embedding_{len(runs)}"])
    vocab = corpus.Vocabulary(tuple(words), {w: 1 for w in words},
                              {w: 1 for w in words}, 1)
    return runs, vocab


def _top_words_csv(run_dir, names, top_k):
    """First top_k words from the first existing ranking CSV among names."""
    for name in names:
        path = os.path.join(run_dir, name)
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
            return [r["word"] for r in rows[:top_k]], name
    raise ConfigError(f"none of {names} found in {run_dir}")


def cmd_interpret(args) -> int:
    out_dir = args.out or args.run
    os.makedirs(out_dir, exist_ok=True)
    runs, vocab = _load_embeddings(args.run)
    written = []

    probes = [p for p in (args.probes or "").split(",") if p]
    for word in [w for w in (args.queries or "").split(",") if w]:
        reports = interpret.nearest_words(word, runs, vocab, k=args.k, probes=probes)
        path = os.path.join(out_dir, f"nearest_{word}.csv")
        interpret.write_reports(path, reports, score_name="cosine_distance")
        written.append(path)

    if args.overlap:
        rf_words, rf_src = _top_words_csv(
            args.run,
            ["rf_importance_forest.csv", "rf_importance_forest_selected.csv"],
            args.top_k,
        )
        lasso_words, _ = _top_words_csv(args.run, ["lasso_coefficients.csv"], args.top_k)
        norm_words, _ = _top_words_csv(args.run, ["norm_ranking.csv"], args.top_k)
        counts = interpret.selection_overlap(rf_words, lasso_words, norm_words,
                                             top_k=args.top_k)
        A, B, C = (set(ws[: args.top_k]) for ws in (rf_words, lasso_words, norm_words))
        words = {
            "rf_only": A - B - C,
            "lasso_only": B - A - C,
            "norm_only": C - A - B,
            "rf_lasso": (A & B) - C,
            "rf_norm": (A & C) - B,
            "lasso_norm": (B & C) - A,
            "all_three": A & B & C,
        }
        payload = {
            "top_k": args.top_k,
            "rf_source": rf_src,
            "counts": counts,
            "words": {name: sorted(ws) for name, ws in words.items()},
        }
        path = os.path.join(out_dir, "overlap.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        written.append(path)
        print("ranking overlap (top {}): ".format(args.top_k) +
              ", ".join(f"{k}={v}" for k, v in counts.items()))

    for path in written:
        print(f"wrote {path}")
    if not written:
        print("nothing to do: pass --queries and/or --overlap")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textcast",
        description="forecast daily series from dated text documents",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic bundle with ground truth")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--spec", help="JSON file overriding the default generator spec")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate + normalize documents and a series")
    p.add_argument("--documents", required=True, help="JSONL with date and text")
    p.add_argument("--series", required=True, help="CSV with the daily target")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--date-field", default="date")
    p.add_argument("--value-field", default="value")
    p.add_argument("--unit", default="")
    p.add_argument("--stopwords", help="'en', 'fr' or a path to a word list")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="execute an experiment config")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="output artifact directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for the B final runs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("interpret", help="reports from a finished run directory")
    p.add_argument("--run", required=True, help="run directory with artifacts")
    p.add_argument("--out", default=None, help="report directory (default: run dir)")
    p.add_argument("--queries", help="comma-separated words for neighbour tables")
    p.add_argument("--probes", help="comma-separated probe words to append")
    p.add_argument("--k", type=int, default=9, help="neighbours per query")
    p.add_argument("--overlap", action="store_true",
                   help="write top-k ranking overlap regions")
    p.add_argument("--top-k", type=int, default=50, dest="top_k")
    p.set_defaults(func=cmd_interpret)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc)
    except TextcastError as exc:
        return _fail(exc)
    except (OSError, ValueError, LookupError, ZeroDivisionError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
