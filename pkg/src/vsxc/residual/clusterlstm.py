"""Window clustering plus one LSTM per cluster for the residual component.

Windows are standardized with one global (mean, std) before K-means, so the
clusters still separate by level and scale. Each cluster's LSTM then sees its
windows z-normalized with that cluster's own statistics; predictions are mapped
back to the original scale.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..stattests import TestResult, ljung_box
from .kmeans import KMeansModel, kmeans_fit, nearest_centroid
from .lstm import LstmWeights, forward, init_weights, lstm_forward, train_lstm

log = logging.getLogger(__name__)

WINDOW = 24


class ClusterSizeError(ValueError):
    pass


class ResidualGateError(ValueError):
    """Residual looks like white noise, so there is nothing for an LSTM to learn."""


@dataclass(frozen=True, eq=False)
class WindowSet:
    windows: np.ndarray
    next_values: np.ndarray

    def __len__(self) -> int:
        return int(self.windows.shape[0])

    @property
    def length(self) -> int:
        return int(self.windows.shape[1])


def make_windows(series, length: int = WINDOW) -> WindowSet:
    """Stride-1 windows of ``length`` values, each paired with the value that follows it."""
    x = np.asarray(getattr(series, "values", series), dtype=np.float64)
    if length < 1:
        raise ValueError("window length must be >= 1")
    if x.size <= length:
        raise ValueError(f"series of length {x.size} too short for windows of {length} "
                         "(need at least one next-step target)")
    W = np.lib.stride_tricks.sliding_window_view(x[:-1], length).copy()
    return WindowSet(W, x[length:].copy())


@dataclass(frozen=True)
class ResidualConfig:
    k: int = 4
    window: int = WINDOW
    hidden: int = 6
    layers: int = 2
    epochs: int = 200
    lr: float = 1e-2
    min_cluster: int = 5
    n_jobs: int = 1

    def __post_init__(self):
        if self.k < 1 or self.window < 1 or self.hidden < 1 or self.layers < 1:
            raise ValueError("k, window, hidden and layers must be positive")
        if self.epochs < 0 or not self.lr > 0:
            raise ValueError("epochs must be >= 0 and lr positive")


@dataclass(eq=False)
class ClusterLstmModel:
    kmeans: KMeansModel
    lstms: list
    normalization: np.ndarray  # (K, 2): per-cluster mean, std
    global_stats: tuple = (0.0, 1.0)
    window: int = WINDOW
    losses: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.lstms) != self.kmeans.K:
            raise ValueError("need exactly one LSTM per cluster")

    @property
    def K(self) -> int:
        return self.kmeans.K

    def standardize(self, windows) -> np.ndarray:
        gm, gs = self.global_stats
        return (np.asarray(windows, dtype=np.float64) - gm) / gs

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "global_stats": list(self.global_stats),
            "centroids": self.kmeans.centroids.tolist(),
            "inertia": self.kmeans.inertia,
            "normalization": self.normalization.tolist(),
            "lstms": [w.to_dict() for w in self.lstms],
            "final_losses": [float(l[-1]) if len(l) else None for l in self.losses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterLstmModel":
        C = np.asarray(d["centroids"], dtype=np.float64)
        km = KMeansModel(C, float(d["inertia"]), np.zeros(0, dtype=np.int64))
        return cls(km, [LstmWeights.from_dict(w) for w in d["lstms"]],
                   np.asarray(d["normalization"], dtype=np.float64),
                   tuple(d["global_stats"]), int(d["window"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ClusterLstmModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _stats(a: np.ndarray) -> tuple[float, float]:
    mu, sd = float(a.mean()), float(a.std())
    return mu, (sd if sd > 0 else 1.0)


def clusterlstm_train(windows: WindowSet, K: int = 4, cfg: ResidualConfig = ResidualConfig(),
                      seed: int = 0) -> ClusterLstmModel:
    """Cluster the windows once, then train each cluster's LSTM on its own members."""
    W, y = windows.windows, windows.next_values
    if len(windows) < K:
        raise ValueError(f"cannot form {K} clusters from {len(windows)} windows")
    gstats = _stats(W)
    Xg = (W - gstats[0]) / gstats[1]
    km = kmeans_fit(Xg, K, seed=seed)
    sizes = np.bincount(km.labels, minlength=K)
    small = np.flatnonzero(sizes < cfg.min_cluster)
    if small.size:
        raise ClusterSizeError(
            f"cluster {int(small[0])} has only {int(sizes[small[0]])} windows "
            f"(minimum {cfg.min_cluster}); retry with a smaller K than {K}")

    seeds = np.random.SeedSequence(seed).spawn(K)
    norm = np.array([_stats(W[km.labels == k]) for k in range(K)])

    def train_one(k: int):
        mask = km.labels == k
        mu, sd = norm[k]
        w0 = init_weights(cfg.hidden, cfg.layers, 1, np.random.default_rng(seeds[k]))
        return train_lstm(w0, (W[mask] - mu) / sd, (y[mask] - mu) / sd, cfg.epochs, cfg.lr)

    if cfg.n_jobs > 1 and K > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            fitted = list(pool.map(train_one, range(K)))
    else:
        fitted = [train_one(k) for k in range(K)]

    model = ClusterLstmModel(km, [f[0] for f in fitted], norm, gstats, W.shape[1],
                             [f[1] for f in fitted])
    # routing audit: each training window goes to the model of its nearest centroid
    if not np.array_equal(nearest_centroid(km.centroids, Xg), km.labels):
        raise AssertionError("training windows are not routed to their nearest centroid")
    return model


def fit_residual(series, cfg: ResidualConfig = ResidualConfig(), seed: int = 0,
                 force: bool = False) -> tuple[ClusterLstmModel, TestResult]:
    """Ljung-Box gate at lag 1, then windowing and training. ``force`` skips the gate."""
    gate = ljung_box(series, lag=1)
    if not gate.reject_at_05:
        msg = (f"Ljung-Box p={gate.p_value:.4g} at lag 1: residual is indistinguishable "
               "from white noise")
        if not force:
            raise ResidualGateError(msg + "; pass force=True (--force) to train anyway")
        log.warning("%s; training anyway", msg)
    model = clusterlstm_train(make_windows(series, cfg.window), cfg.k, cfg, seed)
    return model, gate


def clusterlstm_predict(model: ClusterLstmModel, recent, horizon: int) -> np.ndarray:
    """Recursive multi-step forecast from the last ``window`` residual values."""
    L = model.window
    hist = np.asarray(recent, dtype=np.float64)
    if hist.size < L:
        raise ValueError(f"need {L} values of history, got {hist.size}")
    buf = np.empty(L + horizon)
    buf[:L] = hist[-L:]
    for h in range(horizon):
        win = buf[h: h + L]
        k = int(nearest_centroid(model.kmeans.centroids, model.standardize(win))[0])
        mu, sd = model.normalization[k]
        buf[L + h] = lstm_forward(model.lstms[k], (win - mu) / sd) * sd + mu
    return buf[L:].copy()


def lstm_predict(w: LstmWeights, mean: float, std: float, recent, horizon: int,
                 window: int = WINDOW) -> np.ndarray:
    """Recursive forecast with one LSTM and fixed normalization (the unclustered path)."""
    buf = np.empty(window + horizon)
    buf[:window] = np.asarray(recent, dtype=np.float64)[-window:]
    for h in range(horizon):
        win = buf[h: h + window]
        buf[window + h] = lstm_forward(w, (win - mean) / std) * std + mean
    return buf[window:].copy()


def clusterlstm_one_step(model: ClusterLstmModel, series) -> np.ndarray:
    """One-step-ahead predictions for positions ``window .. len-1`` using observed history."""
    x = np.asarray(getattr(series, "values", series), dtype=np.float64)
    L = model.window
    if x.size <= L:
        return np.zeros(0)
    W = np.lib.stride_tricks.sliding_window_view(x[:-1], L)
    labels = nearest_centroid(model.kmeans.centroids, model.standardize(W))
    out = np.empty(W.shape[0])
    for k in range(model.K):
        mask = labels == k
        if mask.any():
            mu, sd = model.normalization[k]
            out[mask] = forward(model.lstms[k], (W[mask] - mu) / sd)[0] * sd + mu
    return out
