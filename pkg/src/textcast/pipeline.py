"""Experiment machinery: evaluation metrics, RF-OOB feature selection, grid
search, retraining, multi-run summaries, forecast aggregation, the numeric
benchmark, and residual diagnostics.
"""
from __future__ import annotations

import itertools
import math
import statistics
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateError,
    DegenerateWarning,
    EmptySelectionError,
    ShapeError,
    SpecError,
)
from .forest import ForestRegressor

__all__ = [
    "Metrics",
    "compute_metrics",
    "compute_mape_guarded",
    "FeatureSelectionResult",
    "select_features",
    "GridSearchResult",
    "expand_grid",
    "grid_search",
    "retrain_full",
    "RunSummary",
    "multi_run",
    "aggregate",
    "benchmark_numeric",
    "ResidualDiagnostics",
    "residual_diagnostics",
]


@dataclass(frozen=True)
class Metrics:
    """MAPE is in percent; RMSE and MAE in target units; R² dimensionless."""

    mape: float
    rmse: float
    mae: float
    r2: float


def _as_aligned(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or yhat.ndim != 1 or y.shape != yhat.shape:
        raise ShapeError(f"mismatched prediction shapes {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise SpecError("metrics need at least one point")
    return y, yhat


def _mape(y, yhat) -> float:
    if np.any(y == 0.0):
        raise ZeroDivisionError(
            "MAPE undefined at zero actuals; use compute_mape_guarded"
        )
    return float(100.0 * np.mean(np.abs((y - yhat) / y)))


def compute_metrics(y, yhat) -> Metrics:
    """All four evaluation metrics.

    MAPE = 100/T * sum |(y - yhat)/y|; R² = 1 - SSE/SST with the sample mean
    of ``y`` (degenerate SST = 0 reports R² = 0.0).  A zero actual raises
    ZeroDivisionError pointing at the guarded MAPE variant.
    """
    y, yhat = _as_aligned(y, yhat)
    err = y - yhat
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - float(np.sum(err**2)) / sst
    return Metrics(_mape(y, yhat), rmse, mae, r2)


def compute_mape_guarded(y, yhat, quantile: float = 0.05) -> float:
    """MAPE restricted to points where y exceeds its empirical quantile.

    The quantile uses the nearest-rank method (smallest order statistic with
    cumulative fraction >= quantile) and the comparison is strict.  When all
    actuals tie the guard keeps everything; if the strict filter would drop
    every point, EmptySelectionError is raised.
    """
    y, yhat = _as_aligned(y, yhat)
    if not 0.0 <= quantile < 1.0:
        raise SpecError("quantile must be in [0, 1)")
    if np.all(y == y[0]):
        return _mape(y, yhat)
    rank = max(1, math.ceil(quantile * y.size))
    cutoff = np.sort(y)[rank - 1]
    keep = y > cutoff
    if not keep.any():
        raise EmptySelectionError(f"no actual value exceeds the {quantile:.0%} quantile")
    return _mape(y[keep], yhat[keep])


# ---------------------------------------------------------------------------
# feature selection (incremental RF scan ranked by OOB importance)


@dataclass(frozen=True)
class FeatureSelectionResult:
    """Outcome of the incremental OOB scan.

    ``ranked_words`` orders words by mean importance over the B repetitions;
    ``r2_curve[k-1]`` holds the B OOB R² values for the top-(k) refits;
    ``v_star`` is the count whose median OOB R² is highest (smallest on ties).
    """

    ranked_words: tuple
    r2_curve: np.ndarray  # (K, B)
    v_star: int
    importance_mean: np.ndarray  # (V,) aligned with `words`
    importance_runs: np.ndarray  # (B, V)
    per_run_rankings: tuple
    words: tuple

    @property
    def selected_words(self) -> tuple:
        return self.ranked_words[: self.v_star]


def _derive_seed(*key) -> int:
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def select_features(X, y, words=None, b: int = 10, base_seed: int = 0,
                    scan_cap: int = 300, forest_params: dict | None = None) -> FeatureSelectionResult:
    """Rank features by RF OOB permutation importance, then scan top-k refits.

    One repetition: fit a forest, rank features by OOB importance, refit on
    the top k for k = 1..min(V, scan_cap) and record each OOB R².  The scan is
    repeated ``b`` times with derived seeds; v_star maximizes the median R²
    over repetitions.  Fit on training+validation rows.

    The reported ranking is by mean importance over repetitions (ties
    lexicographic on the word).  With ``mtry="all"`` in ``forest_params`` the
    whole procedure is equivariant under column permutations.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"bad shapes X{X.shape}, y{y.shape}")
    p = X.shape[1]
    if words is None:
        words = tuple(f"f{i}" for i in range(p))
    words = tuple(words)
    if len(words) != p:
        raise SpecError("one name per column required")
    if b < 1:
        raise SpecError("b must be >= 1")
    params = dict(forest_params or {})
    params.pop("random_state", None)

    K = min(p, scan_cap)
    r2_curve = np.empty((K, b))
    importance_runs = np.empty((b, p))
    per_run_rankings = []
    for i in range(b):
        seed_i = _derive_seed(base_seed, i, 0)
        rf = ForestRegressor(**params, random_state=seed_i).fit(X, y)
        imp = rf.oob_importance(X, y, seed=seed_i)
        importance_runs[i] = imp
        order = sorted(range(p), key=lambda j: (-imp[j], words[j]))
        per_run_rankings.append(tuple(words[j] for j in order))
        for k in range(1, K + 1):
            cols = order[:k]  # columns in importance-rank order (permutation-stable)
            sub = np.ascontiguousarray(X[:, cols])
            rf_k = ForestRegressor(**params, random_state=_derive_seed(base_seed, i, k))
            rf_k.fit(sub, y)
            r2_curve[k - 1, i] = rf_k.oob_r2(sub, y)

    medians = np.median(r2_curve, axis=1)
    v_star = int(np.argmax(medians)) + 1  # argmax takes the smallest index on ties
    importance_mean = importance_runs.mean(axis=0)
    final_order = sorted(range(p), key=lambda j: (-importance_mean[j], words[j]))
    return FeatureSelectionResult(
        ranked_words=tuple(words[j] for j in final_order),
        r2_curve=r2_curve,
        v_star=v_star,
        importance_mean=importance_mean,
        importance_runs=importance_runs,
        per_run_rankings=tuple(per_run_rankings),
        words=words,
    )


# ---------------------------------------------------------------------------
# grid search / retrain / multi-run


@dataclass(frozen=True)
class GridSearchResult:
    best_config: dict
    best_index: int
    best_rmse: float
    leaderboard: tuple  # one dict per cell: {config, rmse, error}


def expand_grid(param_lists: dict) -> list:
    """Cartesian product of per-key value lists, in deterministic key order."""
    keys = list(param_lists)
    combos = itertools.product(*(param_lists[k] for k in keys))
    return [dict(zip(keys, combo)) for combo in combos]


def grid_search(factory, grid, X_train, y_train, X_val, y_val,
                pass_validation: bool = False) -> GridSearchResult:
    """Exhaustive search; the winner has the lowest validation RMSE.

    ``factory(config)`` builds a fresh estimator per cell.  Cells that raise
    are recorded as failed (warning emitted) and excluded; ties keep the
    earlier grid entry.  ``pass_validation`` forwards the validation split
    into ``fit`` for model kinds that use it for epoch selection.
    """
    grid = list(grid)
    if not grid:
        raise SpecError("empty grid")
    y_val = np.asarray(y_val, dtype=np.float64)
    leaderboard = []
    best_idx, best_rmse = -1, np.inf
    for idx, config in enumerate(grid):
        try:
            model = factory(dict(config))
            if pass_validation:
                model.fit(X_train, y_train, X_val, y_val)
            else:
                model.fit(X_train, y_train)
            pred = np.asarray(model.predict(X_val), dtype=np.float64)
            rmse = float(np.sqrt(np.mean((y_val - pred) ** 2)))
            err = ""
        except Exception as exc:  # soft failure: one bad cell must not kill the run
            rmse = float("nan")
            err = f"{type(exc).__name__}: {exc}"
            warnings.warn(f"grid cell {idx} failed: {err}", DegenerateWarning)
        leaderboard.append({"config": dict(config), "rmse": rmse, "error": err})
        if not math.isnan(rmse) and rmse < best_rmse:
            best_idx, best_rmse = idx, rmse
    if best_idx < 0:
        raise DegenerateError("every grid cell failed")
    return GridSearchResult(dict(grid[best_idx]), best_idx, best_rmse, tuple(leaderboard))


def retrain_full(factory, config: dict, X, y):
    """Fresh fit of the winning configuration on the train+validation union."""
    return factory(dict(config)).fit(X, y)


@dataclass(frozen=True)
class RunSummary:
    """Mean ± sample std of each metric over B seeded runs."""

    mean: Metrics
    std: Metrics
    per_run: tuple  # B Metrics
    predictions: np.ndarray  # (B, T)
    seeds: tuple
    extras: tuple = ()  # optional per-run payloads (e.g. importances)

    @property
    def b(self) -> int:
        return len(self.per_run)


def multi_run(run_fn, b: int = 10, base_seed: int = 0, n_jobs: int = 1) -> RunSummary:
    """Execute ``run_fn(seed)`` for seeds base_seed..base_seed+b-1.

    ``run_fn`` returns (test predictions, Metrics) for one fit, optionally
    plus a third per-run payload that is collected into ``extras``.  Standard
    deviations use ddof=1 and are 0 by convention when b = 1.  With
    ``n_jobs > 1`` runs execute in worker processes (not threads: the
    jit-compiled tree kernels use a per-process RNG); results are collected
    in seed order either way, so the summary is identical.
    """
    if b < 1:
        raise SpecError("b must be >= 1")
    seeds = tuple(base_seed + i for i in range(b))
    if n_jobs != 1 and b > 1:
        from joblib import Parallel, delayed

        outputs = Parallel(n_jobs=n_jobs, backend="loky")(
            delayed(run_fn)(seed) for seed in seeds
        )
    else:
        outputs = [run_fn(seed) for seed in seeds]
    preds = []
    per_run = []
    extras = []
    for out in outputs:
        p, m = out[0], out[1]
        if len(out) > 2:
            extras.append(out[2])
        preds.append(np.asarray(p, dtype=np.float64))
        per_run.append(m)
    table = np.array(
        [[m.mape, m.rmse, m.mae, m.r2] for m in per_run], dtype=np.float64
    )
    mean = Metrics(*(float(v) for v in table.mean(axis=0)))
    if b > 1:
        std = Metrics(*(float(v) for v in table.std(axis=0, ddof=1)))
    else:
        std = Metrics(0.0, 0.0, 0.0, 0.0)
    return RunSummary(mean, std, tuple(per_run), np.vstack(preds), seeds,
                      tuple(extras))


def aggregate(preds_a, preds_b) -> np.ndarray:
    """Elementwise mean of two forecasts (the two best by validation RMSE)."""
    a = np.asarray(preds_a, dtype=np.float64)
    b = np.asarray(preds_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"mismatched prediction shapes {a.shape} vs {b.shape}")
    return 0.5 * (a + b)


_BENCHMARK_FEATURES = ("time_of_year", "day_of_week", "temperature", "wind")


def benchmark_numeric(train_features: dict, y_train, test_features: dict, y_test,
                      forest_params: dict | None = None, seed: int = 0,
                      mape_guard_quantile: float | None = None):
    """Random forest on the four numeric covariates; returns (model, Metrics).

    Both feature dicts must supply time_of_year, day_of_week, temperature and
    wind arrays; this is the no-text reference the text models are compared
    against.  ``mape_guard_quantile`` switches MAPE to the guarded variant for
    targets that touch zero.
    """
    for name in _BENCHMARK_FEATURES:
        if name not in train_features or name not in test_features:
            raise SpecError(f"missing benchmark covariate {name!r}")
    Xtr = np.column_stack([np.asarray(train_features[k], dtype=np.float64)
                           for k in _BENCHMARK_FEATURES])
    Xte = np.column_stack([np.asarray(test_features[k], dtype=np.float64)
                           for k in _BENCHMARK_FEATURES])
    params = dict(forest_params or {"n_trees": 300, "mtry": "third"})
    params.pop("random_state", None)
    model = ForestRegressor(**params, random_state=seed).fit(Xtr, np.asarray(y_train, dtype=np.float64))
    y_test = np.asarray(y_test, dtype=np.float64)
    pred = model.predict(Xte)
    if mape_guard_quantile is None:
        metrics = compute_metrics(y_test, pred)
    else:
        err = y_test - pred
        sst = float(np.sum((y_test - y_test.mean()) ** 2))
        metrics = Metrics(
            compute_mape_guarded(y_test, pred, mape_guard_quantile),
            float(np.sqrt(np.mean(err**2))),
            float(np.mean(np.abs(err))),
            0.0 if sst == 0.0 else 1.0 - float(np.sum(err**2)) / sst,
        )
    return model, metrics


# ---------------------------------------------------------------------------
# residual diagnostics


@dataclass(frozen=True)
class ResidualDiagnostics:
    mean: float
    std: float
    ks_statistic: float
    ks_p_indicator: float
    lag1_autocorr: float
    qq_points: np.ndarray  # (n, 2): theoretical, empirical


def _ks_p(x: float) -> float:
    """Asymptotic Kolmogorov tail Q(x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2)."""
    if x <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-16:
            break
    return float(min(1.0, max(0.0, total)))


def residual_diagnostics(y, yhat) -> ResidualDiagnostics:
    """Normality and autocorrelation diagnostics of forecast residuals.

    One-sample Kolmogorov-Smirnov statistic against a normal with the
    residuals' own mean and (1/n) standard deviation, its asymptotic p-value,
    the lag-1 Pearson autocorrelation, and (theoretical, empirical) quantile
    pairs for QQ plotting.  Constant residuals degenerate the normal fit; the
    result is flagged with DegenerateWarning and a p indicator of 0.
    """
    y, yhat = _as_aligned(y, yhat)
    if y.size < 8:
        raise SpecError("residual diagnostics need at least 8 points")
    eps = y - yhat
    n = eps.size
    mean = float(eps.mean())
    std = float(eps.std())
    order = np.sort(eps)

    if std == 0.0:
        warnings.warn(
            "constant residuals: normality assessment is degenerate", DegenerateWarning
        )
        qq = np.column_stack([order, order])
        return ResidualDiagnostics(mean, 0.0, 0.0, 0.0, 0.0, qq)

    dist = statistics.NormalDist(mean, std)
    cdf = np.array([dist.cdf(v) for v in order])
    i = np.arange(1, n + 1)
    ks = float(np.max(np.maximum(i / n - cdf, cdf - (i - 1) / n)))
    p = _ks_p(math.sqrt(n) * ks)

    a, bvec = eps[:-1], eps[1:]
    sa, sb = a.std(), bvec.std()
    if sa == 0.0 or sb == 0.0:
        lag1 = 0.0
    else:
        lag1 = float(np.mean((a - a.mean()) * (bvec - bvec.mean())) / (sa * sb))

    theo = np.array([dist.inv_cdf((j - 0.5) / n) for j in i])
    qq = np.column_stack([theo, order])
    return ResidualDiagnostics(mean, std, ks, p, lag1, qq)
