"""Declarative experiment runner.

Takes a JSON-style config naming the data files, split dates, model families
and search grids; executes the full protocol (align documents with the
series, split, optional detrend + [0,1] scaling, vocabulary, TF-IDF/id
encodings, RF-OOB feature selection, per-family grid search on the validation
split, retrain on train+validation, B seeded runs on the test split,
aggregation of the two best families, diagnostics and interpretability
exports) and writes all artifacts plus a manifest into the output directory.

All randomness flows from the single config seed, so reruns with an identical
manifest produce byte-identical tables.
"""
from __future__ import annotations

import copy
import csv
import datetime as dt
import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import __version__, corpus, encode, interpret, linmod, series as tseries
from .errors import ConfigError, SpecError
from .forest import ForestRegressor
from .neural import GruRegressor, MlpRegressor, export_loss_curve
from .pipeline import (
    Metrics,
    RunSummary,
    aggregate,
    benchmark_numeric,
    compute_mape_guarded,
    compute_metrics,
    expand_grid,
    grid_search,
    multi_run,
    residual_diagnostics,
    select_features,
)

__all__ = [
    "validate_config",
    "run_experiment",
    "default_synth_config",
    "config_hash",
    "FULL_SCALE_GRIDS",
]

FAMILIES = ("lasso", "forest", "forest_selected", "mlp", "gru")

#: documented default search grids (heavy; meant for full-scale data — quick
#: runs and CI configs should pass explicit small grids instead)
FULL_SCALE_GRIDS = {
    "forest": {
        "n_trees": [100, 300, 500],
        "max_depth": [8, 16, None],
        "mtry": ["sqrt", "third", "all"],
        "min_leaf": [1, 5],
    },
    "mlp": {
        "hidden": [[32], [64], [32, 32], [64, 32], [32, 64], [64, 64]],
        "dropout": [0.25, 0.33],
        "optimizer": ["sgd_momentum", "adam"],
        "learning_rate": [1e-3, 1e-2],
    },
    "gru": {
        "hidden_size": [16, 32, 64],
        "dense": [[32], [64], [32, 32], [64, 32], [32, 64], [64, 64]],
        "dropout": [0.25, 0.33],
        "optimizer": ["sgd_momentum", "adam"],
        "learning_rate": [1e-3, 1e-2],
    },
}


@contextmanager
def _stage(name: str):
    """Tag escaping exceptions with the pipeline stage for CLI reporting."""
    try:
        yield
    except BaseException as exc:
        if not hasattr(exc, "stage"):
            try:
                exc.stage = name
            except Exception:
                pass
        raise


# ---------------------------------------------------------------------------
# config handling


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"missing config field '{path}.{key}'" if path else
                          f"missing config field '{key}'")
    return cfg[key]


def validate_config(raw: dict) -> dict:
    """Fill defaults and check the schema; raises ConfigError naming fields."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = copy.deepcopy(raw)
    version = cfg.setdefault("version", 1)
    if version != 1:
        raise ConfigError(f"unsupported config version {version!r}")
    cfg.setdefault("seed", 0)
    cfg.setdefault("b_runs", 10)
    if not isinstance(cfg["b_runs"], int) or cfg["b_runs"] < 1:
        raise ConfigError("'b_runs' must be a positive integer")

    ser = _require(cfg, "series", "")
    _require(ser, "path", "series")
    ser.setdefault("date_field", "date")
    ser.setdefault("value_field", "value")
    ser.setdefault("unit", "")
    ser.setdefault("detrend", False)

    docs = _require(cfg, "documents", "")
    _require(docs, "path", "documents")
    docs.setdefault("stopwords", None)

    spl = _require(cfg, "split", "")
    for key in ("train_end", "validation_end"):
        value = _require(spl, key, "split")
        try:
            dt.date.fromisoformat(value)
        except (TypeError, ValueError):
            raise ConfigError(f"'split.{key}' must be an ISO date, got {value!r}")

    voc = cfg.setdefault("vocabulary", {})
    voc.setdefault("min_count", 7)
    voc.setdefault("max_doc_frac", 0.40)

    models = cfg.setdefault("models", ["lasso", "forest", "mlp", "gru"])
    for name in models:
        if name not in FAMILIES:
            raise ConfigError(
                f"unknown model family {name!r} in 'models'; pick from {list(FAMILIES)}"
            )
    if len(set(models)) != len(models):
        raise ConfigError("'models' lists a family twice")

    sel = cfg.setdefault("feature_selection", {})
    sel.setdefault("enabled", True)
    sel.setdefault("b", 10)
    sel.setdefault("scan_cap", 300)
    sel.setdefault("max_vocab", None)
    sel.setdefault("forest", {"n_trees": 100, "mtry": "sqrt"})

    las = cfg.setdefault("lasso", {})
    las.setdefault("n_alphas", 50)
    las.setdefault("min_alpha_ratio", 1e-4)
    las.setdefault("tol", 1e-7)
    las.setdefault("max_iter", 10_000)

    grids = cfg.setdefault("grids", {})
    for name in grids:
        if name not in ("forest", "forest_selected", "mlp", "gru"):
            raise ConfigError(f"unknown grid key {name!r} in 'grids'")
        if not isinstance(grids[name], list) or not grids[name]:
            raise ConfigError(f"'grids.{name}' must be a non-empty list of configs")

    guard = cfg.setdefault("mape_guard_quantile", None)
    if guard is not None and not (0.0 <= float(guard) < 1.0):
        raise ConfigError("'mape_guard_quantile' must be in [0, 1)")
    cfg.setdefault("aggregate", True)
    cfg.setdefault("benchmark", None)

    emb = cfg.setdefault("embedding_analysis", {})
    emb.setdefault("enabled", False)
    emb.setdefault("vocab_size", 300)
    emb.setdefault("b", 10)
    emb.setdefault("k", 9)
    emb.setdefault("queries", [])
    emb.setdefault("model", {})
    if emb["enabled"] and not sel["enabled"]:
        raise ConfigError(
            "'embedding_analysis.enabled' needs 'feature_selection.enabled' "
            "(the enlarged vocabulary is ranked by selection importance)"
        )
    return cfg


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(cfg: dict, input_hashes: dict) -> str:
    """Digest covering the canonical config and every input file's bytes."""
    payload = _canonical_json({"config": cfg, "inputs": input_hashes})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# small shared pieces


@dataclass(frozen=True)
class TargetTransform:
    """Detrend (optional) + min-max scaling fitted on one date range."""

    trend: tseries.TrendModel | None
    scaler: tseries.ScalingParams

    def forward(self, dates, values: np.ndarray) -> np.ndarray:
        if self.trend is not None:
            values = values - self.trend.at(dates)
        return self.scaler.transform(values)

    def invert(self, dates, scaled: np.ndarray) -> np.ndarray:
        values = self.scaler.inverse(scaled)
        if self.trend is not None:
            values = values + self.trend.at(dates)
        return values


def _fit_transform_on(segment: tseries.TimeSeries, detrend_on: bool) -> TargetTransform:
    trend = tseries.fit_linear_trend(segment) if detrend_on else None
    working = tseries.detrend(segment, trend) if trend is not None else segment
    _, scaler = tseries.scale_minmax(working)
    return TargetTransform(trend, scaler)


def _metrics_for(y, yhat, guard) -> Metrics:
    if guard is None:
        return compute_metrics(y, yhat)
    err = np.asarray(y) - np.asarray(yhat)
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((np.asarray(y) - np.mean(y)) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - float(np.sum(err**2)) / sst
    return Metrics(compute_mape_guarded(y, yhat, guard), rmse, mae, r2)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def _nn_kwargs(config: dict) -> dict:
    """JSON grid cell -> estimator kwargs (lists become tuples)."""
    out = {}
    for key, value in config.items():
        out[key] = tuple(value) if isinstance(value, list) else value
    return out


# ---------------------------------------------------------------------------
# the experiment


def run_experiment(config: dict, out_dir, seed: int | None = None, jobs: int = 1) -> dict:
    """Execute a full config; returns the manifest (also written as JSON)."""
    cfg = validate_config(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    base_seed = int(cfg["seed"])
    b_runs = int(cfg["b_runs"])
    guard = cfg["mape_guard_quantile"]
    t_start = time.time()
    os.makedirs(out_dir, exist_ok=True)
    artifacts: dict = {}

    def _path(name: str) -> str:
        artifacts[name] = name
        return os.path.join(out_dir, name)

    # ---- load and align inputs
    with _stage("load inputs"):
        ser_cfg = cfg["series"]
        raw_series = tseries.load_series(
            ser_cfg["path"], ser_cfg["date_field"], ser_cfg["value_field"], ser_cfg["unit"]
        )
        documents = corpus.load_documents(cfg["documents"]["path"])
        stop_cfg = cfg["documents"]["stopwords"]
        stopwords = corpus.load_stopwords(stop_cfg) if stop_cfg else frozenset()
        tokens_by_date = {
            doc.date: corpus.preprocess(doc.text, stopwords) for doc in documents
        }
        shared = [d for d in raw_series.dates if d in tokens_by_date]
        if not shared:
            raise ConfigError("documents and series share no dates")
        keep = {d: i for i, d in enumerate(raw_series.dates)}
        values = raw_series.values[[keep[d] for d in shared]]
        full = tseries.TimeSeries(tuple(shared), values, raw_series.unit)

    # ---- split
    with _stage("split"):
        spec = tseries.SplitSpec(
            dt.date.fromisoformat(cfg["split"]["train_end"]),
            dt.date.fromisoformat(cfg["split"]["validation_end"]),
        )
        train, val, test = tseries.split(full, spec)
        learn_dates = train.dates + val.dates
        learn_values = np.concatenate([train.values, val.values])
        learn = tseries.TimeSeries(learn_dates, learn_values, full.unit)
        tok = lambda dates: [tokens_by_date[d] for d in dates]
        toks_train, toks_val, toks_test = tok(train.dates), tok(val.dates), tok(test.dates)
        toks_learn = toks_train + toks_val

    # ---- target transforms (tuning fits on train, final on train+validation)
    with _stage("target transform"):
        detrend_on = bool(ser_cfg["detrend"])
        tune_tf = _fit_transform_on(train, detrend_on)
        final_tf = _fit_transform_on(learn, detrend_on)
        y_train_s = tune_tf.forward(train.dates, train.values)
        y_val_s = tune_tf.forward(val.dates, val.values)
        y_learn_s = final_tf.forward(learn.dates, learn.values)

    # ---- vocabulary over the learning corpus
    with _stage("vocabulary"):
        voc_cfg = cfg["vocabulary"]
        vocab = corpus.build_vocabulary(
            toks_learn, int(voc_cfg["min_count"]), float(voc_cfg["max_doc_frac"])
        )
        stats = corpus.corpus_stats(toks_learn, vocab)
        with open(_path("corpus_stats.json"), "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)

    # ---- encodings (full vocabulary)
    with _stage("encode"):
        enc_tune = encode.TfidfEncoder(vocab)
        X_train = enc_tune.fit_transform(toks_train)
        X_val = enc_tune.transform(toks_val)
        enc_final = encode.TfidfEncoder(vocab)
        X_learn = enc_final.fit_transform(toks_learn)
        X_test = enc_final.transform(toks_test)

    # ---- feature selection on train+validation
    selection = None
    sel_cfg = cfg["feature_selection"]
    if sel_cfg["enabled"]:
        with _stage("feature selection"):
            selection = select_features(
                X_learn,
                y_learn_s,
                words=vocab.words,
                b=int(sel_cfg["b"]),
                base_seed=base_seed,
                scan_cap=int(sel_cfg["scan_cap"]),
                forest_params=sel_cfg["forest"],
            )
            v_star = selection.v_star
            if sel_cfg["max_vocab"] is not None:
                v_star = min(v_star, int(sel_cfg["max_vocab"]))
            selected_words = selection.ranked_words[:v_star]
            col_of = {w: j for j, w in enumerate(selection.words)}
            _write_csv(
                _path("selection_importance.csv"),
                ["word", "mean_importance"],
                [(w, _fmt(selection.importance_mean[col_of[w]]))
                 for w in selection.ranked_words],
            )
            b_sel = selection.r2_curve.shape[1]
            _write_csv(
                _path("selection_r2_curve.csv"),
                ["k", "median_oob_r2", *(f"run_{i}" for i in range(b_sel))],
                [
                    (k + 1, _fmt(np.median(selection.r2_curve[k])),
                     *(_fmt(v) for v in selection.r2_curve[k]))
                    for k in range(selection.r2_curve.shape[0])
                ],
            )
            with open(_path("selected_words.txt"), "w", encoding="utf-8") as fh:
                fh.write("\n".join(selected_words) + "\n")
    if selection is not None:
        vocab_sel = corpus.restrict_vocabulary(vocab, selected_words)
    else:
        vocab_sel = vocab

    # ---- selected-vocabulary encodings
    with _stage("encode selected"):
        need_sel = any(f in cfg["models"] for f in ("forest_selected", "mlp", "gru"))
        if need_sel:
            enc_sel_tune = encode.TfidfEncoder(vocab_sel)
            Xs_train = enc_sel_tune.fit_transform(toks_train)
            Xs_val = enc_sel_tune.transform(toks_val)
            enc_sel_final = encode.TfidfEncoder(vocab_sel)
            Xs_learn = enc_sel_final.fit_transform(toks_learn)
            Xs_test = enc_sel_final.transform(toks_test)
        if "gru" in cfg["models"]:
            def seq(toks, training):
                out = []
                for t in toks:
                    s = corpus.to_ids(t, vocab_sel, training=training)
                    if not training:
                        # unknown-id positions are masked no-ops in the GRU;
                        # dropping them keeps in-vocabulary tokens inside the
                        # training padding width instead of truncating them
                        s = corpus.TokenSequence(s.ids[s.ids != 0], s.date)
                    out.append(s)
                return out
            seq_learn = seq(toks_learn, True)
            S = max(1, corpus.max_sequence_length(seq_learn))
            ids_learn = corpus.pad_batch(seq_learn, S).rows
            ids_train = ids_learn[: len(train)]
            ids_val = ids_learn[len(train):]
            ids_test = corpus.pad_batch(seq(toks_test, False), S).rows

    # ---- model families
    summaries: dict = {}
    best_val_rmse: dict = {}
    extras: dict = {}

    def _finalize(family, fit_predict, val_rmse):
        """B seeded final runs; predictions are mapped back to original units.

        ``fit_predict(seed)`` returns (scaled test predictions, extra payload);
        keeping the run functions pure lets multi_run fan them out to worker
        processes.
        """
        def run(seed_i):
            pred_s, extra = fit_predict(seed_i)
            pred = final_tf.invert(test.dates, np.asarray(pred_s, dtype=np.float64))
            return pred, _metrics_for(test.values, pred, guard), extra

        summary = multi_run(run, b=b_runs, base_seed=base_seed, n_jobs=jobs)
        summaries[family] = summary
        best_val_rmse[family] = val_rmse
        rows = []
        for i, date in enumerate(test.dates):
            row = [date.isoformat(), _fmt(test.values[i])]
            row += [_fmt(summary.predictions[r, i]) for r in range(b_runs)]
            row.append(_fmt(summary.predictions[:, i].mean()))
            rows.append(row)
        _write_csv(
            _path(f"predictions_{family}.csv"),
            ["date", "actual", *(f"run_{r}" for r in range(b_runs)), "mean"],
            rows,
        )
        return summary

    def _leaderboard(family, result):
        _write_csv(
            _path(f"leaderboard_{family}.csv"),
            ["rank_order", "validation_rmse_scaled", "error", "config"],
            [
                (i, "" if np.isnan(cell["rmse"]) else _fmt(cell["rmse"]),
                 cell["error"], _canonical_json(cell["config"]))
                for i, cell in enumerate(result.leaderboard)
            ],
        )

    if "lasso" in cfg["models"]:
        with _stage("model lasso"):
            las = cfg["lasso"]
            best_alpha, board = linmod.tune_alpha(
                X_train, y_train_s, X_val, y_val_s,
                n_alphas=int(las["n_alphas"]), min_ratio=float(las["min_alpha_ratio"]),
                tol=float(las["tol"]), max_iter=int(las["max_iter"]),
            )
            _write_csv(
                _path("leaderboard_lasso.csv"),
                ["rank_order", "validation_rmse_scaled", "error", "config"],
                [(i, _fmt(rmse), "", _canonical_json({"alpha": a}))
                 for i, (a, rmse) in enumerate(board)],
            )
            final_lasso = linmod.LassoRegressor(
                alpha=best_alpha, tol=float(las["tol"]), max_iter=int(las["max_iter"])
            ).fit(X_learn, y_learn_s)
            extras["lasso_model"] = final_lasso

            def lasso_run(_seed, model=final_lasso):
                # deterministic fit: every "run" is the same model
                return model.predict(X_test), None

            _finalize("lasso", lasso_run, min(r for _, r in board))
            coef_order = sorted(
                range(vocab.size), key=lambda j: (-abs(final_lasso.coef_[j]), vocab.words[j])
            )
            _write_csv(
                _path("lasso_coefficients.csv"),
                ["word", "coefficient"],
                [(vocab.words[j], _fmt(final_lasso.coef_[j])) for j in coef_order],
            )

    def _forest_family(family, Xtr, Xva, Xle, Xte, words):
        grid = cfg["grids"].get(family) or cfg["grids"].get("forest")
        if grid is None:
            grid = expand_grid(FULL_SCALE_GRIDS["forest"])
        result = grid_search(
            lambda c: ForestRegressor(random_state=base_seed, **c),
            grid, Xtr, y_train_s, Xva, y_val_s,
        )
        _leaderboard(family, result)

        def forest_run(seed_i):
            model = ForestRegressor(random_state=seed_i, **result.best_config)
            model.fit(Xle, y_learn_s)
            importance = model.oob_importance(Xle, y_learn_s, seed=seed_i)
            return model.predict(Xte), importance

        summary = _finalize(family, forest_run, result.best_rmse)
        importances = list(summary.extras)
        reports = interpret.rf_word_importance(importances, _as_vocab(words), k=len(words))
        interpret.write_reports(
            _path(f"rf_importance_{family}.csv"), reports, score_name="mean_importance"
        )
        extras[f"{family}_importances"] = importances

    def _as_vocab(words):
        # importance reports only need the word list; counts are irrelevant here
        return corpus.Vocabulary(tuple(words), {w: 1 for w in words},
                                 {w: 1 for w in words}, 1)

    if "forest" in cfg["models"]:
        with _stage("model forest"):
            _forest_family("forest", X_train, X_val, X_learn, X_test, vocab.words)
    if "forest_selected" in cfg["models"]:
        with _stage("model forest_selected"):
            _forest_family("forest_selected", Xs_train, Xs_val, Xs_learn, Xs_test,
                           vocab_sel.words)

    if "mlp" in cfg["models"]:
        with _stage("model mlp"):
            grid = cfg["grids"].get("mlp")
            if grid is None:
                grid = expand_grid(FULL_SCALE_GRIDS["mlp"])
            result = grid_search(
                lambda c: MlpRegressor(random_state=base_seed, **_nn_kwargs(c)),
                grid, Xs_train, y_train_s, Xs_val, y_val_s, pass_validation=True,
            )
            _leaderboard("mlp", result)

            def mlp_run(seed_i):
                model = MlpRegressor(random_state=seed_i, **_nn_kwargs(result.best_config))
                model.fit(Xs_learn, y_learn_s)
                return model.predict(Xs_test), model.loss_curve_

            summary = _finalize("mlp", mlp_run, result.best_rmse)
            export_loss_curve(_path("loss_curve_mlp.csv"), summary.extras[0])

    if "gru" in cfg["models"]:
        with _stage("model gru"):
            grid = cfg["grids"].get("gru")
            if grid is None:
                grid = expand_grid(FULL_SCALE_GRIDS["gru"])
            result = grid_search(
                lambda c: GruRegressor(
                    vocab_size=vocab_sel.size, random_state=base_seed, **_nn_kwargs(c)
                ),
                grid, ids_train, y_train_s, ids_val, y_val_s, pass_validation=True,
            )
            _leaderboard("gru", result)

            def gru_run(seed_i):
                model = GruRegressor(
                    vocab_size=vocab_sel.size, random_state=seed_i,
                    **_nn_kwargs(result.best_config),
                )
                model.fit(ids_learn, y_learn_s)
                payload = (model.embedding_.copy(), model.loss_curve_)
                return model.predict(ids_test), payload

            summary = _finalize("gru", gru_run, result.best_rmse)
            export_loss_curve(_path("loss_curve_gru.csv"), summary.extras[0][1])
            extras["gru_embeddings"] = [e for e, _ in summary.extras]

    # ---- benchmark on numeric covariates (optional)
    if cfg["benchmark"]:
        with _stage("benchmark"):
            bench = cfg["benchmark"]
            covars = {}
            for name in ("temperature", "wind"):
                c = _require(bench, name, "benchmark")
                s = tseries.load_series(
                    c["path"], c.get("date_field", "date"), c.get("value_field", "value")
                )
                lookup = dict(zip(s.dates, s.values))
                missing = [d for d in full.dates if d not in lookup]
                if missing:
                    raise ConfigError(
                        f"benchmark series '{name}' misses {len(missing)} experiment dates"
                    )
                covars[name] = np.array([lookup[d] for d in full.dates])
            cal = tseries.calendar_features(full.dates)
            n_learn = len(learn)
            feats = {
                "time_of_year": cal.time_of_year,
                "day_of_week": cal.day_of_week.astype(np.float64),
                "temperature": covars["temperature"],
                "wind": covars["wind"],
            }
            tr_f = {k: v[:n_learn] for k, v in feats.items()}
            te_f = {k: v[n_learn:] for k, v in feats.items()}
            bench_runs = []
            bench_preds = []
            Xte_bench = np.column_stack(
                [te_f[k] for k in ("time_of_year", "day_of_week", "temperature", "wind")]
            )
            for i in range(b_runs):
                model, m = benchmark_numeric(
                    tr_f, learn.values, te_f, test.values,
                    forest_params=bench.get("forest"), seed=base_seed + i,
                    mape_guard_quantile=guard,
                )
                bench_preds.append(model.predict(Xte_bench))
                bench_runs.append(m)
            table = np.array([[m.mape, m.rmse, m.mae, m.r2] for m in bench_runs])
            std = table.std(axis=0, ddof=1) if b_runs > 1 else np.zeros(4)
            summaries["benchmark"] = RunSummary(
                Metrics(*(float(v) for v in table.mean(axis=0))),
                Metrics(*(float(v) for v in std)),
                tuple(bench_runs), np.vstack(bench_preds),
                tuple(base_seed + i for i in range(b_runs)),
            )

    # ---- aggregation of the two best families by validation RMSE
    if cfg["aggregate"] and len(best_val_rmse) >= 2:
        with _stage("aggregate"):
            ranked = sorted(best_val_rmse, key=lambda f: (best_val_rmse[f], f))
            fam_a, fam_b = ranked[0], ranked[1]
            preds_a = summaries[fam_a].predictions
            preds_b = summaries[fam_b].predictions
            agg_preds = np.vstack(
                [aggregate(preds_a[i], preds_b[i]) for i in range(b_runs)]
            )
            agg_metrics = tuple(
                _metrics_for(test.values, agg_preds[i], guard) for i in range(b_runs)
            )
            table = np.array([[m.mape, m.rmse, m.mae, m.r2] for m in agg_metrics])
            std = table.std(axis=0, ddof=1) if b_runs > 1 else np.zeros(4)
            summaries["aggregate"] = RunSummary(
                Metrics(*(float(v) for v in table.mean(axis=0))),
                Metrics(*(float(v) for v in std)),
                agg_metrics, agg_preds,
                summaries[fam_a].seeds,
            )
            extras["aggregate_of"] = (fam_a, fam_b)
            rows = []
            for i, date in enumerate(test.dates):
                row = [date.isoformat(), _fmt(test.values[i])]
                row += [_fmt(agg_preds[r, i]) for r in range(b_runs)]
                row.append(_fmt(agg_preds[:, i].mean()))
                rows.append(row)
            _write_csv(
                _path("predictions_aggregate.csv"),
                ["date", "actual", *(f"run_{r}" for r in range(b_runs)), "mean"],
                rows,
            )

    # ---- metrics table
    with _stage("metrics table"):
        order = ["benchmark", "lasso", "forest", "forest_selected", "mlp", "gru",
                 "aggregate"]
        rows = []
        for family in order:
            if family not in summaries:
                continue
            s = summaries[family]
            rows.append([
                family,
                _fmt(s.mean.mape), _fmt(s.std.mape),
                _fmt(s.mean.rmse), _fmt(s.std.rmse),
                _fmt(s.mean.mae), _fmt(s.std.mae),
                _fmt(s.mean.r2), _fmt(s.std.r2),
                s.b,
            ])
        _write_csv(
            _path("metrics.csv"),
            ["family", "mape_mean", "mape_std", "rmse_mean", "rmse_std",
             "mae_mean", "mae_std", "r2_mean", "r2_std", "b"],
            rows,
        )

    # ---- residual diagnostics on the headline forecaster
    with _stage("diagnostics"):
        headline = "aggregate" if "aggregate" in summaries else None
        if headline is None and best_val_rmse:
            headline = min(best_val_rmse, key=lambda f: (best_val_rmse[f], f))
        if headline is not None and len(test) >= 8:
            mean_pred = summaries[headline].predictions.mean(axis=0)
            diag = residual_diagnostics(test.values, mean_pred)
            with open(_path("diagnostics.json"), "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "family": headline,
                        "mean": diag.mean,
                        "std": diag.std,
                        "ks_statistic": diag.ks_statistic,
                        "ks_p_indicator": diag.ks_p_indicator,
                        "lag1_autocorr": diag.lag1_autocorr,
                    },
                    fh, indent=2, sort_keys=True,
                )
            _write_csv(
                _path("qq_points.csv"),
                ["theoretical", "empirical"],
                [(_fmt(a), _fmt(b)) for a, b in diag.qq_points],
            )

    # ---- embedding analysis preset (enlarged vocabulary, all data as training)
    emb_cfg = cfg["embedding_analysis"]
    emb_source = None
    emb_vocab = None
    if emb_cfg["enabled"]:
        with _stage("embedding analysis"):
            top = selection.ranked_words[: min(int(emb_cfg["vocab_size"]), vocab.size)]
            emb_vocab = corpus.restrict_vocabulary(vocab, top)
            toks_all = [tokens_by_date[d] for d in full.dates]
            seqs = [corpus.to_ids(t, emb_vocab, training=True) for t in toks_all]
            S_all = max(1, corpus.max_sequence_length(seqs))
            ids_all = corpus.pad_batch(seqs, S_all).rows
            all_tf = _fit_transform_on(full, detrend_on)
            y_all = all_tf.forward(full.dates, full.values)
            emb_source = []
            for i in range(int(emb_cfg["b"])):
                model = GruRegressor(
                    vocab_size=emb_vocab.size, random_state=base_seed + i,
                    **_nn_kwargs(emb_cfg["model"]),
                )
                model.fit(ids_all, y_all)
                emb_source.append(model.embedding_.copy())
    elif "gru_embeddings" in extras:
        emb_source = extras["gru_embeddings"]
        emb_vocab = vocab_sel

    if emb_source is not None:
        with _stage("embedding reports"):
            interpret.export_embeddings(_path("embeddings.npz"), emb_source, emb_vocab)
            norms = interpret.norm_ranking(emb_source, emb_vocab, k=emb_vocab.size)
            _write_csv(
                _path("norm_ranking.csv"),
                ["rank", "word", "norm_mean", "log_norm_mean", "norm_std"],
                [(r.rank, r.word, _fmt(r.score), _fmt(np.log(r.score)), _fmt(r.std))
                 for r in norms],
            )
            for query in emb_cfg["queries"]:
                word = query["word"] if isinstance(query, dict) else str(query)
                probes = query.get("probes", []) if isinstance(query, dict) else []
                reports = interpret.nearest_words(
                    word, emb_source, emb_vocab, k=int(emb_cfg["k"]), probes=probes
                )
                interpret.write_reports(
                    _path(f"nearest_{word}.csv"), reports, score_name="cosine_distance"
                )

    # ---- manifest
    with _stage("manifest"):
        input_hashes = {
            "series": _sha256_file(ser_cfg["path"]),
            "documents": _sha256_file(cfg["documents"]["path"]),
        }
        if cfg["benchmark"]:
            for name in ("temperature", "wind"):
                input_hashes[name] = _sha256_file(cfg["benchmark"][name]["path"])
        manifest = {
            "version": __version__,
            "config": cfg,
            "config_hash": config_hash(cfg, input_hashes),
            "inputs": input_hashes,
            "seed": base_seed,
            "b_runs": b_runs,
            "artifacts": dict(sorted(artifacts.items())),
            "aggregate_of": list(extras.get("aggregate_of", ())),
            "timing_seconds": round(time.time() - t_start, 3),
        }
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def default_synth_config(bundle_dir, **overrides) -> dict:
    """Quick-running config for a bundle written by ``synth.save_bundle``.

    Splits 2000 synthetic days into 1400/300/300 and uses small explicit
    grids; override any top-level key via keyword arguments.
    """
    cfg = {
        "version": 1,
        "seed": 0,
        "b_runs": 3,
        "series": {"path": os.path.join(bundle_dir, "series.csv"), "detrend": False},
        "documents": {"path": os.path.join(bundle_dir, "documents.jsonl"),
                      "stopwords": None},
        "split": {"train_end": "2015-10-31", "validation_end": "2016-08-26"},
        "vocabulary": {"min_count": 7, "max_doc_frac": 0.40},
        "models": ["lasso", "forest", "mlp", "gru"],
        "feature_selection": {
            "enabled": True, "b": 5, "scan_cap": 25, "max_vocab": None,
            "forest": {"n_trees": 50, "mtry": "sqrt"},
        },
        "lasso": {"n_alphas": 30, "min_alpha_ratio": 1e-3},
        "grids": {
            "forest": [
                {"n_trees": 100, "mtry": "sqrt"},
                {"n_trees": 100, "mtry": "third"},
            ],
            "mlp": [
                {"hidden": [64, 32], "dropout": 0.1, "epochs": 500,
                 "learning_rate": 3e-3},
            ],
            "gru": [
                {"hidden_size": 24, "dense": [24], "embed_dim": 16, "dropout": 0.25,
                 "epochs": 50},
            ],
        },
        "mape_guard_quantile": None,
        "aggregate": True,
        "embedding_analysis": {"enabled": False},
    }
    cfg.update(overrides)
    return cfg
