"""Lag features for the periodic term and a second-order gradient-boosted tree ensemble.

Trees are grown level by level with exact greedy split search. At every level
the rows of all open nodes are laid out once per feature, grouped by node and
sorted by feature value, so every candidate threshold of every node is scored
from prefix sums of the gradient statistics in a single vectorized pass.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .series import TimeSeries
from .vmd import Decomposition

log = logging.getLogger(__name__)

DEFAULT_LAG = 48
COMPONENTS = ("T", "S", "R", "y")


@dataclass(frozen=True, eq=False)
class LagMatrix:
    """Rows are times ``t >= lag``; column ``j*lag + i - 1`` is component j at ``t - i``."""

    features: np.ndarray
    targets: np.ndarray
    lag: int

    @property
    def rows(self) -> int:
        return int(self.features.shape[0])


def lag_features(components, t: int, lag: int) -> np.ndarray:
    """Feature vector for time ``t`` from a sequence of aligned component arrays."""
    return np.concatenate([np.asarray(c[t - lag: t], dtype=np.float64)[::-1] for c in components])


def build_lag_matrix(decomp: Decomposition, y, lag: int = DEFAULT_LAG) -> LagMatrix:
    yv = np.asarray(getattr(y, "values", y), dtype=np.float64)
    comps = [*decomp.components(), yv]
    n = comps[0].size
    if any(c.size != n for c in comps):
        raise ValueError("trend, periodic, residual and y must have equal length")
    if not 1 <= lag < n:
        raise ValueError(f"lag {lag} must lie in [1, {n - 1}]")
    rows = n - lag
    X = np.empty((rows, len(comps) * lag))
    for j, c in enumerate(comps):
        for i in range(1, lag + 1):
            X[:, j * lag + i - 1] = c[lag - i: n - i]
    return LagMatrix(X, comps[1][lag:].copy(), lag)


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 300
    learning_rate: float = 0.1
    max_depth: int = 4
    reg_lambda: float = 1.0
    gamma: float = 0.0
    early_stopping_rounds: int | None = 30
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.n_rounds < 0 or self.max_depth < 0:
            raise ValueError("n_rounds and max_depth must be non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("reg_lambda and gamma must be non-negative")


@dataclass(eq=False)
class RegressionTree:
    """Flat array tree. ``feature == -1`` marks a leaf; rows with ``x <= threshold`` go left."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)
    grad_sum: list = field(default_factory=list)
    hess_sum: list = field(default_factory=list)
    gain: list = field(default_factory=list)

    def add_node(self, G: float, H: float, lam: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(-G / (H + lam) if H + lam > 0 else 0.0)
        self.grad_sum.append(G)
        self.hess_sum.append(H)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        val = np.asarray(self.value)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = feat[node]
            inner = f >= 0
            if not inner.any():
                return val[node]
            go_left = X[rows[inner], f[inner]] <= thr[node[inner]]
            node[inner] = np.where(go_left, left[node[inner]], right[node[inner]])

    def used_features(self) -> set[int]:
        return {f for f in self.feature if f >= 0}

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in
                ("feature", "threshold", "left", "right", "value", "grad_sum", "hess_sum", "gain")}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(**{k: list(v) for k, v in d.items()})


def split_gain(GL: float, HL: float, GR: float, HR: float, lam: float, gamma: float) -> float:
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam)
                  - (GL + GR) ** 2 / (HL + HR + lam)) - gamma


@dataclass(eq=False)
class GbtModel:
    trees: list
    learning_rate: float
    base_score: float
    reg_lambda: float
    gamma: float
    max_depth: int
    n_rounds: int
    n_features: int
    train_loss: list = field(default_factory=list)
    fit_predictions: np.ndarray | None = None

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score, "learning_rate": self.learning_rate,
            "reg_lambda": self.reg_lambda, "gamma": self.gamma, "max_depth": self.max_depth,
            "n_rounds": self.n_rounds, "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbtModel":
        return cls([RegressionTree.from_dict(t) for t in d["trees"]], float(d["learning_rate"]),
                   float(d["base_score"]), float(d["reg_lambda"]), float(d["gamma"]),
                   int(d["max_depth"]), int(d["n_rounds"]), int(d["n_features"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GbtModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _grow_tree(X, XT, order, g, cfg: GbtConfig) -> RegressionTree:
    """Grow one tree on gradients ``g`` (unit hessians).

    ``XT`` is ``X.T`` made contiguous and ``order[f]`` sorts feature f.
    """
    n, F = X.shape
    lam, gamma = cfg.reg_lambda, cfg.gamma
    tree = RegressionTree()
    tree.add_node(float(g.sum()), float(n), lam)
    node_of = np.zeros(n, dtype=np.int64)
    active = [0]
    for _ in range(cfg.max_depth):
        if not active:
            break
        A = len(active)
        compact = np.full(len(tree.feature), -1, dtype=np.int16)
        compact[active] = np.arange(A, dtype=np.int16)
        cid = compact[node_of]
        counts = np.bincount(cid[cid >= 0], minlength=A)
        skip = n - int(counts.sum())  # rows sitting in finished leaves sort first
        starts = skip + np.concatenate([[0], np.cumsum(counts)[:-1]])
        ends = starts + counts

        # rows grouped by open node, ascending feature value inside each group
        if skip == 0 and A == 1:
            rows = order
        else:
            perm = np.argsort(cid[order], axis=1, kind="stable")
            rows = np.take_along_axis(order, perm, axis=1)
        xs = np.take_along_axis(XT, rows, axis=1)
        gc = np.cumsum(g[rows], axis=1)

        # position p scores the split between sorted positions p and p+1 of its group;
        # the hessian is identically 1, so left-hand hessian sums are row counts
        grp = np.full(n, -1, dtype=np.int64)
        for a in range(A):
            grp[starts[a]:ends[a]] = a
        last = np.zeros(n, dtype=bool)
        last[ends[counts > 0] - 1] = True
        pos = np.flatnonzero((grp >= 0) & ~last)
        ga = grp[pos]
        before = starts[ga] - 1
        G = np.array([tree.grad_sum[nd] for nd in active])[ga]
        H = np.array([tree.hess_sum[nd] for nd in active])[ga]
        HL = (pos - before).astype(np.float64)
        GL = gc[:, pos]
        has_before = before >= 0
        if has_before.any():
            GL[:, has_before] -= gc[:, before[has_before]]
        GR = G - GL
        gain = GL * GL
        gain /= HL + lam
        GR *= GR
        GR /= H - HL + lam
        gain += GR
        gain -= G * G / (H + lam) + gamma
        gain[xs[:, pos + 1] <= xs[:, pos]] = -np.inf

        next_active = []
        offset = 0
        for a, node in enumerate(active):
            width = max(int(counts[a]) - 1, 0)
            seg = gain[:, offset: offset + width]
            seg_pos = pos[offset: offset + width]
            offset += width
            if width == 0:
                continue
            per_feat = seg.max(axis=1)
            f = int(np.argmax(per_feat))  # first maximum -> lowest feature index
            if not per_feat[f] > 0.0:
                continue
            p = int(seg_pos[int(np.argmax(seg[f]))])  # first maximum -> lowest threshold
            lo_x, hi_x = xs[f, p], xs[f, p + 1]
            thr = 0.5 * (lo_x + hi_x)
            if not lo_x <= thr < hi_x:
                thr = lo_x
            member = node_of == node
            go_left = member & (X[:, f] <= thr)
            go_right = member & ~go_left
            GLn, HLn = float(g[go_left].sum()), float(np.count_nonzero(go_left))
            GRn, HRn = float(g[go_right].sum()), float(np.count_nonzero(go_right))
            exact = split_gain(GLn, HLn, GRn, HRn, lam, gamma)
            if not exact > 0.0:
                continue
            li = tree.add_node(GLn, HLn, lam)
            ri = tree.add_node(GRn, HRn, lam)
            tree.feature[node], tree.threshold[node] = f, float(thr)
            tree.left[node], tree.right[node] = li, ri
            tree.gain[node] = exact
            node_of[go_left] = li
            node_of[go_right] = ri
            next_active += [li, ri]
        active = next_active
    return tree


def gbt_fit(m: LagMatrix | tuple, cfg: GbtConfig = GbtConfig()) -> GbtModel:
    """Boost squared-error regression trees (gradient ``pred - y``, hessian 1)."""
    if isinstance(m, LagMatrix):
        X, y = m.features, m.targets
    else:
        X, y = (np.asarray(a, dtype=np.float64) for a in m)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows to fit")
    n_all = X.shape[0]

    n_fit = n_all
    if cfg.early_stopping_rounds and cfg.validation_fraction > 0:
        n_val = int(round(cfg.validation_fraction * n_all))
        if n_val >= 1 and n_all - n_val >= 2:
            n_fit = n_all - n_val
    Xf, yf = X[:n_fit], y[:n_fit]
    Xv, yv = X[n_fit:], y[n_fit:]

    base = float(yf.mean())
    XT = np.ascontiguousarray(Xf.T)
    order = np.argsort(XT, axis=1, kind="stable")
    pred = np.full(n_fit, base)
    pred_v = np.full(Xv.shape[0], base)
    trees, losses = [], [float(np.mean((pred - yf) ** 2))]
    best_val, best_round, stale = np.inf, 0, 0
    for r in range(cfg.n_rounds):
        tree = _grow_tree(Xf, XT, order, pred - yf, cfg)
        trees.append(tree)
        pred = pred + cfg.learning_rate * tree.predict(Xf)
        losses.append(float(np.mean((pred - yf) ** 2)))
        if Xv.shape[0]:
            pred_v = pred_v + cfg.learning_rate * tree.predict(Xv)
            val = float(np.mean((pred_v - yv) ** 2))
            if val < best_val:
                best_val, best_round, stale = val, r + 1, 0
            else:
                stale += 1
                if stale >= cfg.early_stopping_rounds:
                    log.debug("early stop at round %d (best %d)", r + 1, best_round)
                    break
    if Xv.shape[0]:
        trees = trees[:best_round]
        losses = losses[: best_round + 1]
    model = GbtModel(trees, cfg.learning_rate, base, cfg.reg_lambda, cfg.gamma,
                     cfg.max_depth, len(trees), X.shape[1], losses)
    model.fit_predictions = model.predict(X)
    return model


def gbt_predict(model: GbtModel, features) -> float:
    f = np.asarray(features, dtype=np.float64).ravel()
    return float(model.predict(f[None, :])[0])


def audit_split_gains(model: GbtModel) -> list[tuple[float, float]]:
    """(stored gain, gain re-derived from stored child statistics) for every split."""
    pairs = []
    for tree in model.trees:
        for i, f in enumerate(tree.feature):
            if f < 0:
                continue
            l, r = tree.left[i], tree.right[i]
            pairs.append((tree.gain[i], split_gain(tree.grad_sum[l], tree.hess_sum[l],
                                                   tree.grad_sum[r], tree.hess_sum[r],
                                                   model.reg_lambda, model.gamma)))
    return pairs


def forecast_periodic(model, trend_hist, periodic_hist, residual_hist, y_hist, horizon: int,
                      trend_future=None, residual_future=None, lag: int = DEFAULT_LAG) -> np.ndarray:
    """Recursive multi-step forecast of the periodic term.

    Each predicted value is appended to the periodic history and, together with
    the supplied trend / residual forecasts, to the recomposed y history before
    the next step. ``model`` is a :class:`GbtModel` or any object with a
    ``predict(X)`` method on 2-D lag features.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    hist = [np.asarray(getattr(a, "values", a), dtype=np.float64)
            for a in (trend_hist, periodic_hist, residual_hist, y_hist)]
    n = hist[0].size
    if any(a.size != n for a in hist):
        raise ValueError("history arrays must be aligned")
    if n < lag:
        raise ValueError(f"need at least {lag} samples of history, got {n}")
    if horizon == 0:
        return np.empty(0)
    zeros = np.zeros(horizon)
    tf = zeros if trend_future is None else np.asarray(trend_future, dtype=np.float64)
    rf = zeros if residual_future is None else np.asarray(residual_future, dtype=np.float64)
    if tf.size < horizon or rf.size < horizon:
        raise ValueError("trend/residual forecasts shorter than the horizon")
    T = np.concatenate([hist[0][-lag:], tf[:horizon]])
    R = np.concatenate([hist[2][-lag:], rf[:horizon]])
    S = np.concatenate([hist[1][-lag:], zeros])
    Y = np.concatenate([hist[3][-lag:], zeros])
    for h in range(horizon):
        t = lag + h
        x = lag_features((T, S, R, Y), t, lag)
        S[t] = float(model.predict(x[None, :])[0])
        Y[t] = T[t] + S[t] + R[t]
    return S[lag:].copy()


class PersistenceModel:
    """Predicts the most recent periodic value (the first S lag) at every step."""

    def __init__(self, lag: int = DEFAULT_LAG):
        self.lag = lag

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return X[:, self.lag].copy()

    def to_dict(self) -> dict:
        return {"kind": "persistence", "lag": self.lag}
