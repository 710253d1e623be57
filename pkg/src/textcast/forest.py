"""Random-forest regression with out-of-bag error and permutation importance.

Trees are grown greedily by variance-reduction splits (CART) on bootstrap
samples of the training set; split thresholds are midpoints of consecutive
distinct feature values, tie-broken by lowest feature index then lowest
threshold for determinism.  The hot loops are compiled with numba.

Out-of-bag (OOB) machinery: each sample is predicted by averaging only the
trees whose bootstrap missed it; importance is the mean increase in OOB MSE
when one feature's column is permuted within each tree's OOB set.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import CoverageError, ShapeError, SpecError

__all__ = ["ForestRegressor"]


@njit(cache=True)
def _grow_tree(X, y, samples, mtry, max_depth, min_leaf, seed):
    """Build one CART regression tree on ``samples`` (row indices, may repeat).

    Returns flat arrays (feature, threshold, left, right, value); feature -1
    marks a leaf.  A node splits only when some candidate strictly improves
    the variance criterion; mtry features are drawn without replacement per
    node and scanned in ascending index order.
    """
    n_total = samples.shape[0]
    p = X.shape[1]
    max_nodes = 2 * n_total + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes, np.float64)

    np.random.seed(seed)
    idx = samples.copy()
    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n_total
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    feat_pool = np.empty(p, np.int64)
    xbuf = np.empty(n_total, np.float64)
    ibuf = np.empty(n_total, np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        m = hi - lo

        tot = 0.0
        for i in range(lo, hi):
            tot += y[idx[i]]
        value[node] = tot / m

        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        y0 = y[idx[lo]]
        constant = True
        for i in range(lo + 1, hi):
            if y[idx[i]] != y0:
                constant = False
                break
        if constant:
            continue

        # draw mtry distinct features, then scan them in ascending order
        for j in range(p):
            feat_pool[j] = j
        k = mtry if mtry < p else p
        for j in range(k):
            r = j + np.random.randint(0, p - j)
            tmp = feat_pool[j]
            feat_pool[j] = feat_pool[r]
            feat_pool[r] = tmp
        chosen = np.sort(feat_pool[:k])

        base = tot * tot / m
        best_gain = base
        best_feat = -1
        best_thr = 0.0
        for c in range(k):
            f = chosen[c]
            for i in range(m):
                xbuf[i] = X[idx[lo + i], f]
            order = np.argsort(xbuf[:m], kind="mergesort")
            left_sum = 0.0
            for i in range(m - 1):
                left_sum += y[idx[lo + order[i]]]
                xa = xbuf[order[i]]
                xb = xbuf[order[i + 1]]
                if xb <= xa:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                rs = tot - left_sum
                gain = left_sum * left_sum / nl + rs * rs / nr
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (xa + xb)
        if best_feat < 0:
            continue

        # stable partition: left block then right block
        nl = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                ibuf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if X[idx[i], best_feat] > best_thr:
                ibuf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = ibuf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
    )


@njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, X):
    m = X.shape[0]
    out = np.empty(m, np.float64)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _r2(y, yhat) -> float:
    sse = float(np.sum((y - yhat) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    return 1.0 - sse / sst


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Bagged CART regression trees with OOB error and permutation importance.

    Parameters
    ----------
    n_trees : number of trees.
    max_depth : depth cap, None for unbounded.
    min_leaf : minimum samples per leaf.
    mtry : features considered per split: "sqrt", "third", "all", or an int.
    bootstrap : draw n samples with replacement per tree; switching it off
        trains every tree on the full data (OOB statistics then unavailable).
    random_state : base seed; tree t uses seed random_state + t for both its
        bootstrap draw and its per-node feature sampling.
    """

    def __init__(self, n_trees: int = 100, max_depth=None, min_leaf: int = 1,
                 mtry="sqrt", bootstrap: bool = True, random_state: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _resolve_mtry(self, p: int) -> int:
        if self.mtry == "sqrt":
            return max(1, int(round(np.sqrt(p))))
        if self.mtry == "third":
            return max(1, p // 3)
        if self.mtry == "all":
            return p
        if isinstance(self.mtry, str):
            raise SpecError(f"unknown mtry {self.mtry!r}; use sqrt, third, all or an int")
        k = int(self.mtry)
        if k < 1:
            raise SpecError(f"mtry must be >= 1, got {self.mtry!r}")
        return min(k, p)

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ShapeError(f"bad shapes X{X.shape}, y{y.shape}")
        if self.n_trees < 1:
            raise SpecError("n_trees must be >= 1")
        n, p = X.shape
        mtry = self._resolve_mtry(p)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        self.trees_ = []
        self.bootstrap_indices_ = np.empty((self.n_trees, n), dtype=np.int64)
        for t in range(self.n_trees):
            seed = int(self.random_state) + t
            if self.bootstrap:
                boot = np.random.default_rng(seed).integers(0, n, size=n)
            else:
                boot = np.arange(n, dtype=np.int64)
            self.bootstrap_indices_[t] = boot
            self.trees_.append(_grow_tree(X, y, boot, mtry, depth, int(self.min_leaf), seed))
        self.n_features_in_ = p
        self._n_samples = n
        return self

    def _check_X(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise SpecError("model not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        one_row = X.ndim == 1
        if one_row:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got shape {X.shape}")
        return X

    def predict(self, X):
        Xc = self._check_X(X)
        acc = np.zeros(Xc.shape[0], dtype=np.float64)
        for tree in self.trees_:
            acc += _predict_tree(*tree, Xc)
        out = acc / len(self.trees_)
        return float(out[0]) if np.ndim(X) == 1 else out

    def _oob_rows(self):
        """Per-tree arrays of row indices the tree never saw."""
        if not self.bootstrap:
            raise CoverageError("forest trained without bootstrap has no OOB samples")
        n = self._n_samples
        rows = []
        for t in range(len(self.trees_)):
            inbag = np.zeros(n, dtype=bool)
            inbag[self.bootstrap_indices_[t]] = True
            rows.append(np.flatnonzero(~inbag))
        return rows

    def oob_r2(self, X, y) -> float:
        """R-squared of out-of-bag predictions on the training data.

        Each sample is predicted by the mean of trees it is OOB for; samples
        in every bootstrap are skipped (their count is in ``oob_skipped_``).
        """
        Xc = self._check_X(X)
        y = np.asarray(y, dtype=np.float64)
        if Xc.shape[0] != self._n_samples or y.shape[0] != self._n_samples:
            raise ShapeError("oob_r2 expects the training data the forest was fitted on")
        acc = np.zeros(self._n_samples)
        counts = np.zeros(self._n_samples)
        for tree, oob in zip(self.trees_, self._oob_rows()):
            if oob.size == 0:
                continue
            acc[oob] += _predict_tree(*tree, Xc[oob])
            counts[oob] += 1
        covered = counts > 0
        self.oob_skipped_ = int(np.sum(~covered))
        if not covered.any():
            raise CoverageError("no sample is out-of-bag for any tree; grow more trees")
        preds = acc[covered] / counts[covered]
        return _r2(y[covered], preds)

    def oob_importance(self, X, y, seed=None) -> np.ndarray:
        """OOB permutation importance per feature.

        For each tree, every feature column is shuffled within the tree's OOB
        rows using one shared per-tree permutation (seeded by (seed, tree));
        the importance of a feature is the mean over trees of the resulting
        MSE increase.  Features unused by a tree contribute exactly 0 for that
        tree.  The vector is normalized to sum to 1 when the total is positive.
        """
        Xc = self._check_X(X)
        y = np.asarray(y, dtype=np.float64)
        if Xc.shape[0] != self._n_samples or y.shape[0] != self._n_samples:
            raise ShapeError("oob_importance expects the training data the forest was fitted on")
        if seed is None:
            seed = int(self.random_state)
        imp = np.zeros(self.n_features_in_)
        n_used = 0
        for t, (tree, oob) in enumerate(zip(self.trees_, self._oob_rows())):
            if oob.size == 0:
                continue
            n_used += 1
            Xo = Xc[oob].copy()
            yo = y[oob]
            base = _predict_tree(*tree, Xo)
            base_mse = float(np.mean((yo - base) ** 2))
            perm = np.random.default_rng((seed, t)).permutation(oob.size)
            features = tree[0]
            for f in np.unique(features[features >= 0]):
                saved = Xo[:, f].copy()
                Xo[:, f] = saved[perm]
                pred = _predict_tree(*tree, Xo)
                Xo[:, f] = saved
                imp[f] += float(np.mean((yo - pred) ** 2)) - base_mse
        if n_used == 0:
            raise CoverageError("no tree has out-of-bag samples")
        imp /= n_used
        total = imp.sum()
        if total > 0:
            imp = imp / total
        return imp
