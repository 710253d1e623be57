"""Differentiable models written directly in numpy (double precision).

Two model kinds share one training loop:

* :class:`MlpRegressor` — dense ReLU stack on numeric feature vectors.
* :class:`GruRegressor` — trainable embedding -> batch norm -> GRU -> dense
  ReLU stack, on padded integer sequences.

Both end in a sigmoid scalar (targets are expected on a [0, 1] scale) and
minimize mean squared error with SGD-momentum or ADAM.  Conventions:

* Embedding row 0 is the padding/unknown vector: all-zero, frozen.
* Batch-norm statistics are computed over non-padding positions only
  (1/n variance, eps = 1e-5); inference uses running averages.
* Masked recurrence: the hidden state is carried through padding steps
  unchanged, so predictions are exactly invariant to extra padding.
* Inverted dropout after the GRU output and after each hidden dense layer;
  inference is a plain forward pass.
* Per-epoch train/validation MSE is recorded; the returned parameters are
  those of the best validation epoch (best training epoch when no validation
  data is given).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .corpus import PaddedBatch
from .errors import DivergenceError, ShapeError, SpecError, StatsError

__all__ = [
    "GruParams",
    "embed",
    "batch_norm",
    "gru_cell",
    "gradient_check",
    "MlpRegressor",
    "GruRegressor",
    "save_model",
    "load_model",
    "export_loss_curve",
]

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1  # running = (1 - m) * running + m * batch


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def embed(ids, E: np.ndarray) -> np.ndarray:
    """Row lookup: id k maps to row k of E; id 0 is the zero padding row."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and ids.min() < 0:
        raise IndexError("negative token id")
    return E[ids]


def batch_norm(x, gamma, beta, mean=None, var=None, eps: float = _BN_EPS) -> np.ndarray:
    """Per-feature normalization: (x - mean)/sqrt(var + eps) * gamma + beta.

    With ``mean``/``var`` omitted they are computed from the batch (training
    mode, 1/n variance); pass running statistics for inference mode.
    """
    x = np.asarray(x, dtype=np.float64)
    if mean is None or var is None:
        if mean is not None or var is not None:
            raise SpecError("pass both mean and var, or neither")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


@dataclass(frozen=True)
class GruParams:
    """Gate weights of one GRU cell (input q, hidden h)."""

    wz: np.ndarray
    wr: np.ndarray
    wh: np.ndarray
    uz: np.ndarray
    ur: np.ndarray
    uh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray


def gru_cell(x, h_prev, params: GruParams) -> np.ndarray:
    """One GRU update:

    z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
    c = tanh(x Wh + (r * h) Uh + bh), h_new = (1 - z) * h + z * c.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    z = _sigmoid(x @ params.wz + h_prev @ params.uz + params.bz)
    r = _sigmoid(x @ params.wr + h_prev @ params.ur + params.br)
    c = np.tanh(x @ params.wh + (r * h_prev) @ params.uh + params.bh)
    return (1.0 - z) * h_prev + z * c


# ---------------------------------------------------------------------------
# optimizers


class _SgdMomentum:
    def __init__(self, lr: float, momentum: float):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        for k in sorted(grads):
            v = self.velocity.get(k)
            if v is None:
                v = np.zeros_like(params[k])
            v = self.momentum * v - self.lr * grads[k]
            self.velocity[k] = v
            params[k] += v


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in sorted(grads):
            g = grads[k]
            m = self.m.get(k)
            if m is None:
                m = np.zeros_like(params[k])
                self.m[k] = m
                self.v[k] = np.zeros_like(params[k])
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _make_optimizer(name: str, lr: float, momentum: float):
    if name == "sgd_momentum":
        return _SgdMomentum(lr, momentum)
    if name == "adam":
        return _Adam(lr)
    raise SpecError(f"unknown optimizer {name!r}; use 'sgd_momentum' or 'adam'")


# ---------------------------------------------------------------------------
# dense stack shared by both model kinds


def _dense_forward(params, n_hidden, a, training, drop_p, rng, cache):
    """ReLU hidden layers then a sigmoid scalar head; inverted dropout after
    each hidden activation when training."""
    for l in range(n_hidden):
        z = a @ params[f"w{l}"] + params[f"b{l}"]
        h = np.maximum(z, 0.0)
        if training and drop_p > 0.0:
            mask = (rng.random(h.shape) >= drop_p) / (1.0 - drop_p)
            h = h * mask
        else:
            mask = None
        cache.append((a, z, mask))
        a = h
    out = a @ params["wo"] + params["bo"]
    yhat = _sigmoid(out[:, 0])
    cache.append((a, yhat))
    return yhat


def _dense_backward(params, n_hidden, cache, dyhat, grads):
    """Returns the gradient w.r.t. the stack input."""
    a_last, yhat = cache[-1]
    dout = (dyhat * yhat * (1.0 - yhat))[:, None]
    grads["wo"] = a_last.T @ dout
    grads["bo"] = dout.sum(axis=0)
    da = dout @ params["wo"].T
    for l in range(n_hidden - 1, -1, -1):
        a_in, z, mask = cache[l]
        if mask is not None:
            da = da * mask
        dz = da * (z > 0.0)
        grads[f"w{l}"] = a_in.T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        da = dz @ params[f"w{l}"].T
    return da


def _init_dense(rng, params, d_in, widths):
    for l, w in enumerate(widths):
        params[f"w{l}"] = _glorot(rng, d_in, w)
        params[f"b{l}"] = np.zeros(w)
        d_in = w
    params["wo"] = _glorot(rng, d_in, 1)
    params["bo"] = np.zeros(1)


# ---------------------------------------------------------------------------
# training loop shared by both model kinds


def _fit_loop(model, params, data, val_data, rng):
    """Mini-batch training with best-epoch parameter selection.

    ``model`` supplies _batch_loss_grads / _eval_mse / _state_snapshot /
    _state_restore; ``data``/``val_data`` are (X, y) pairs in model format.
    """
    X, y = data
    n = y.shape[0]
    opt = _make_optimizer(model.optimizer, model.learning_rate, model.momentum)
    has_val = val_data is not None
    curve = []
    best_score = np.inf
    best_state = model._state_snapshot(params)
    best_epoch = 0
    batch = max(1, int(model.batch_size))
    for epoch in range(1, int(model.epochs) + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start:start + batch]
            loss, grads = model._batch_loss_grads(params, X, y, rows, rng)
            if not np.isfinite(loss):
                raise DivergenceError(f"training loss became non-finite at epoch {epoch}")
            opt.step(params, grads)
        train_mse = model._eval_mse(params, X, y)
        if not np.isfinite(train_mse):
            raise DivergenceError(f"training MSE became non-finite at epoch {epoch}")
        val_mse = model._eval_mse(params, *val_data) if has_val else np.nan
        curve.append((epoch, train_mse, val_mse))
        score = val_mse if has_val else train_mse
        if score < best_score:
            best_score = score
            best_state = model._state_snapshot(params)
            best_epoch = epoch
    model._state_restore(params, best_state)
    model.loss_curve_ = np.array(curve, dtype=np.float64).reshape(-1, 3)
    model.best_epoch_ = best_epoch
    return params


# ---------------------------------------------------------------------------


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Multilayer perceptron on numeric features, sigmoid scalar output.

    ``hidden`` lists the ReLU layer widths; training follows the module
    conventions (MSE loss, best-epoch selection, seeded determinism).
    """

    def __init__(self, hidden=(32,), dropout: float = 0.25, optimizer: str = "adam",
                 learning_rate: float = 1e-3, momentum: float = 0.9,
                 batch_size: int = 32, epochs: int = 200, random_state: int = 0):
        self.hidden = hidden
        self.dropout = dropout
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    # -- parameter handling

    def _init_params(self, d_in: int, rng) -> dict:
        params: dict = {}
        _init_dense(rng, params, d_in, tuple(self.hidden))
        return params

    def _state_snapshot(self, params):
        return {k: v.copy() for k, v in params.items()}

    def _state_restore(self, params, state):
        for k in params:
            params[k][...] = state[k]

    # -- forward / backward

    def _forward(self, params, X, training, rng, cache=None):
        cache = [] if cache is None else cache
        drop = self.dropout if training else 0.0
        return _dense_forward(params, len(self.hidden), X, training, drop, rng, cache)

    def _loss_grads(self, params, X, y, training, rng):
        cache: list = []
        drop = self.dropout if training else 0.0
        yhat = _dense_forward(params, len(self.hidden), X, training, drop, rng, cache)
        diff = yhat - y
        loss = float(np.mean(diff * diff))
        grads: dict = {}
        _dense_backward(params, len(self.hidden), cache, 2.0 * diff / y.shape[0], grads)
        return loss, grads

    def _batch_loss_grads(self, params, X, y, rows, rng):
        return self._loss_grads(params, X[rows], y[rows], True, rng)

    def _eval_mse(self, params, X, y) -> float:
        yhat = self._forward(params, X, False, None)
        return float(np.mean((yhat - y) ** 2))

    def _check_loss_grads(self, params, X, y):
        """Deterministic loss/grads for finite-difference checks (no dropout)."""
        return self._loss_grads(params, np.asarray(X, dtype=np.float64),
                                np.asarray(y, dtype=np.float64), False, None)

    # -- estimator API

    def fit(self, X, y, X_val=None, y_val=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ShapeError(f"bad shapes X{X.shape}, y{y.shape}")
        if y.size and (y.min() < 0.0 or y.max() > 1.0):
            raise SpecError("targets must be scaled to [0, 1] before training")
        rng = np.random.default_rng(self.random_state)
        params = self._init_params(X.shape[1], rng)
        val = None
        if X_val is not None:
            val = (np.asarray(X_val, dtype=np.float64), np.asarray(y_val, dtype=np.float64))
        self.params_ = _fit_loop(self, params, (X, y), val, rng)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise SpecError("model not fitted")
        X = np.asarray(X, dtype=np.float64)
        one_row = X.ndim == 1
        if one_row:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = self._forward(self.params_, X, False, None)
        return float(out[0]) if one_row else out


class GruRegressor(BaseEstimator, RegressorMixin):
    """Embedding + batch-norm + GRU + dense head on padded id sequences.

    ``vocab_size`` is V; ids must lie in 0..V where 0 is padding/unknown.
    The fitted embedding matrix (V+1, embed_dim) is exposed as
    ``embedding_``; its row 0 stays identically zero.
    """

    def __init__(self, vocab_size: int, embed_dim: int = 20, hidden_size: int = 32,
                 dense=(32,), dropout: float = 0.25, optimizer: str = "adam",
                 learning_rate: float = 1e-3, momentum: float = 0.9,
                 batch_size: int = 32, epochs: int = 200, random_state: int = 0):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_size = hidden_size
        self.dense = dense
        self.dropout = dropout
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    # -- parameter handling

    def _init_params(self, rng) -> dict:
        q, h = int(self.embed_dim), int(self.hidden_size)
        params: dict = {}
        emb = rng.uniform(-0.05, 0.05, size=(int(self.vocab_size) + 1, q))
        emb[0] = 0.0
        params["emb"] = emb
        params["gamma"] = np.ones(q)
        params["beta"] = np.zeros(q)
        for gate in ("z", "r", "h"):
            params[f"w{gate}"] = _glorot(rng, q, h)
            params[f"u{gate}"] = _glorot(rng, h, h)
            params[f"b{gate}"] = np.zeros(h)
        _init_dense(rng, params, h, tuple(self.dense))
        return params

    def _fresh_running(self) -> dict:
        q = int(self.embed_dim)
        return {"mean": np.zeros(q), "var": np.ones(q), "count": 0}

    def _state_snapshot(self, params):
        state = {k: v.copy() for k, v in params.items()}
        state["__running__"] = {
            "mean": self.running_["mean"].copy(),
            "var": self.running_["var"].copy(),
            "count": self.running_["count"],
        }
        return state

    def _state_restore(self, params, state):
        for k in params:
            params[k][...] = state[k]
        self.running_ = {
            "mean": state["__running__"]["mean"].copy(),
            "var": state["__running__"]["var"].copy(),
            "count": state["__running__"]["count"],
        }

    # -- forward / backward

    @staticmethod
    def _rows(X) -> np.ndarray:
        rows = X.rows if isinstance(X, PaddedBatch) else np.asarray(X, dtype=np.int64)
        if rows.ndim != 2:
            raise ShapeError("expected an (n, S) integer id matrix")
        return rows

    def _forward(self, params, ids, training, rng, update_running=True):
        """Full forward pass; returns (yhat, cache).

        Batch-norm uses batch statistics over non-padding positions when
        training, frozen running statistics otherwise; the hidden state is
        carried unchanged through padding steps.
        """
        if ids.size and ids.min() < 0:
            raise IndexError("negative token id")
        n, S = ids.shape
        q, hsize = int(self.embed_dim), int(self.hidden_size)
        mask = ids != 0
        emb = params["emb"][ids]  # (n, S, q); raises IndexError beyond V
        flat = emb[mask]  # (M, q) non-padding positions
        M = flat.shape[0]

        if training:
            if M == 0:
                raise SpecError("batch contains only padding")
            mu = flat.mean(axis=0)
            var = flat.var(axis=0)
            if update_running:
                r = self.running_
                r["mean"] = (1 - _BN_MOMENTUM) * r["mean"] + _BN_MOMENTUM * mu
                r["var"] = (1 - _BN_MOMENTUM) * r["var"] + _BN_MOMENTUM * var
                r["count"] += 1
        else:
            if self.running_["count"] == 0:
                raise StatsError("batch-norm running statistics are empty; train first")
            mu = self.running_["mean"]
            var = self.running_["var"]

        inv_std = 1.0 / np.sqrt(var + _BN_EPS)
        xhat = (flat - mu) * inv_std
        bn = params["gamma"] * xhat + params["beta"]
        xseq = np.zeros((n, S, q))
        xseq[mask] = bn

        wz, wr, wh = params["wz"], params["wr"], params["wh"]
        uz, ur, uh = params["uz"], params["ur"], params["uh"]
        bz, br, bh = params["bz"], params["br"], params["bh"]
        h = np.zeros((n, hsize))
        steps = []
        for t in range(S):
            x = xseq[:, t, :]
            z = _sigmoid(x @ wz + h @ uz + bz)
            r = _sigmoid(x @ wr + h @ ur + br)
            c = np.tanh(x @ wh + (r * h) @ uh + bh)
            cand = (1.0 - z) * h + z * c
            m = mask[:, t][:, None]
            h_new = np.where(m, cand, h)
            steps.append((x, h, z, r, c))
            h = h_new

        drop = self.dropout if training else 0.0
        if training and drop > 0.0:
            gmask = (rng.random(h.shape) >= drop) / (1.0 - drop)
            g = h * gmask
        else:
            gmask = None
            g = h
        dense_cache: list = []
        yhat = _dense_forward(params, len(self.dense), g, training, drop, rng, dense_cache)
        cache = {
            "mask": mask, "ids": ids, "xhat": xhat, "inv_std": inv_std, "M": M,
            "steps": steps, "gmask": gmask, "dense": dense_cache, "h_final": h,
        }
        return yhat, cache

    def _backward(self, params, cache, dyhat) -> dict:
        grads: dict = {}
        dg = _dense_backward(params, len(self.dense), cache["dense"], dyhat, grads)
        if cache["gmask"] is not None:
            dg = dg * cache["gmask"]

        mask = cache["mask"]
        steps = cache["steps"]
        n, S = mask.shape
        q, hsize = int(self.embed_dim), int(self.hidden_size)
        wz, wr, wh = params["wz"], params["wr"], params["wh"]
        uz, ur, uh = params["uz"], params["ur"], params["uh"]
        for name in ("wz", "wr", "wh"):
            grads[name] = np.zeros((q, hsize))
        for name in ("uz", "ur", "uh"):
            grads[name] = np.zeros((hsize, hsize))
        for name in ("bz", "br", "bh"):
            grads[name] = np.zeros(hsize)
        dxseq = np.zeros((n, S, q))

        dh = dg
        for t in range(S - 1, -1, -1):
            x, h_prev, z, r, c = steps[t]
            m = mask[:, t][:, None].astype(np.float64)
            da = dh * m  # active rows follow the GRU update
            dh = dh * (1.0 - m)  # padded rows pass the gradient straight through
            dz = da * (c - h_prev)
            dc = da * z
            dh_prev = da * (1.0 - z)

            dpre_c = dc * (1.0 - c * c)
            grads["wh"] += x.T @ dpre_c
            grads["uh"] += (r * h_prev).T @ dpre_c
            grads["bh"] += dpre_c.sum(axis=0)
            d_rh = dpre_c @ uh.T
            dr = d_rh * h_prev
            dh_prev += d_rh * r

            dpre_r = dr * r * (1.0 - r)
            grads["wr"] += x.T @ dpre_r
            grads["ur"] += h_prev.T @ dpre_r
            grads["br"] += dpre_r.sum(axis=0)
            dh_prev += dpre_r @ ur.T

            dpre_z = dz * z * (1.0 - z)
            grads["wz"] += x.T @ dpre_z
            grads["uz"] += h_prev.T @ dpre_z
            grads["bz"] += dpre_z.sum(axis=0)
            dh_prev += dpre_z @ uz.T

            dxseq[:, t, :] = dpre_c @ wh.T + dpre_r @ wr.T + dpre_z @ wz.T
            dh = dh + dh_prev

        # batch-norm backward (batch statistics), then scatter into embedding
        dbn = dxseq[mask]
        xhat, inv_std, M = cache["xhat"], cache["inv_std"], cache["M"]
        grads["gamma"] = (dbn * xhat).sum(axis=0)
        grads["beta"] = dbn.sum(axis=0)
        dxhat = dbn * params["gamma"]
        dflat = (inv_std / M) * (
            M * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        demb = np.zeros_like(params["emb"])
        np.add.at(demb, cache["ids"][mask], dflat)
        grads["emb"] = demb  # row 0 untouched: mask excludes id 0
        return grads

    def _loss_grads(self, params, ids, y, training, rng, update_running=True):
        yhat, cache = self._forward(params, ids, training, rng, update_running)
        diff = yhat - y
        loss = float(np.mean(diff * diff))
        grads = self._backward(params, cache, 2.0 * diff / y.shape[0])
        return loss, grads

    def _batch_loss_grads(self, params, X, y, rows, rng):
        return self._loss_grads(params, X[rows], y[rows], True, rng)

    def _eval_mse(self, params, ids, y) -> float:
        yhat, _ = self._forward(params, ids, False, None)
        return float(np.mean((yhat - y) ** 2))

    def _check_loss_grads(self, params, X, y):
        """Deterministic loss/grads for finite-difference checks: batch-norm in
        training mode with fixed batch statistics, dropout off, running
        averages untouched."""
        saved_drop = self.dropout
        self.dropout = 0.0
        try:
            if not hasattr(self, "running_"):
                self.running_ = self._fresh_running()
            return self._loss_grads(params, self._rows(X),
                                    np.asarray(y, dtype=np.float64),
                                    True, None, update_running=False)
        finally:
            self.dropout = saved_drop

    # -- estimator API

    def fit(self, X, y, X_val=None, y_val=None):
        ids = self._rows(X)
        y = np.asarray(y, dtype=np.float64)
        if ids.shape[0] != y.shape[0]:
            raise ShapeError(f"bad shapes ids{ids.shape}, y{y.shape}")
        if y.size and (y.min() < 0.0 or y.max() > 1.0):
            raise SpecError("targets must be scaled to [0, 1] before training")
        rng = np.random.default_rng(self.random_state)
        params = self._init_params(rng)
        self.running_ = self._fresh_running()
        val = None
        if X_val is not None:
            val = (self._rows(X_val), np.asarray(y_val, dtype=np.float64))
        self.params_ = _fit_loop(self, params, (ids, y), val, rng)
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise SpecError("model not fitted")
        yhat, _ = self._forward(self.params_, self._rows(X), False, None)
        return yhat

    @property
    def embedding_(self) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise SpecError("model not fitted")
        return self.params_["emb"]


# ---------------------------------------------------------------------------


def gradient_check(model, X, y, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs with dropout off and (for sequence models) batch-norm in training
    mode on the fixed batch, so the loss is a pure function of the
    parameters.  Relative error per parameter is
    |ga - gn| / (|ga| + |gn| + 1e-12).
    """
    rng = np.random.default_rng(getattr(model, "random_state", 0))
    if hasattr(model, "params_"):
        params = {k: v.copy() for k, v in model.params_.items()}
    elif isinstance(model, GruRegressor):
        params = model._init_params(rng)
    else:
        params = model._init_params(np.asarray(X).shape[1], rng)

    _, grads = model._check_loss_grads(params, X, y)
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + epsilon
            up, _ = model._check_loss_grads(params, X, y)
            flat_p[i] = orig - epsilon
            down, _ = model._check_loss_grads(params, X, y)
            flat_p[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = flat_g[i]
            err = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoints and exports


def save_model(path, model, vocab_hash: str = "") -> None:
    """Write a fitted model to an npz checkpoint (parameters in double
    precision, config snapshot, optional vocabulary hash)."""
    if not hasattr(model, "params_"):
        raise SpecError("model not fitted")
    kind = "gru" if isinstance(model, GruRegressor) else "mlp"
    config = {k: (list(v) if isinstance(v, tuple) else v)
              for k, v in model.get_params().items()}
    payload = {f"param_{k}": v for k, v in model.params_.items()}
    if kind == "gru":
        payload["running_mean"] = model.running_["mean"]
        payload["running_var"] = model.running_["var"]
        payload["running_count"] = np.array(model.running_["count"])
    meta = {"kind": kind, "config": config, "vocab_hash": vocab_hash}
    payload["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **payload)


def load_model(path):
    """Reconstruct a model saved by :func:`save_model`; returns (model, vocab_hash)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        config = meta["config"]
        for k, v in config.items():
            if isinstance(v, list):
                config[k] = tuple(v)
        if meta["kind"] == "gru":
            model = GruRegressor(**config)
            model.running_ = {
                "mean": data["running_mean"].copy(),
                "var": data["running_var"].copy(),
                "count": int(data["running_count"]),
            }
        else:
            model = MlpRegressor(**config)
        model.params_ = {
            k[len("param_"):]: data[k].copy() for k in data.files if k.startswith("param_")
        }
    if meta["kind"] == "mlp":
        model.n_features_in_ = model.params_["w0"].shape[0] if model.hidden else \
            model.params_["wo"].shape[0]
    return model, meta["vocab_hash"]


def export_loss_curve(path, curve: np.ndarray) -> None:
    """Write (epoch, train MSE, validation MSE) rows as delimited text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for epoch, tr, va in curve:
            va_txt = "" if np.isnan(va) else repr(float(va))
            fh.write(f"{int(epoch)},{repr(float(tr))},{va_txt}\n")
