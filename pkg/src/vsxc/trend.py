"""Piecewise-logistic ("SegSigmoid") trend model with outlier-located changepoints.

Time is normalized to ``u in [0, 1]`` over the training span. The model is

    g(u) = C * sigmoid(z(u)),   z(u) = (k + a(u)'delta) * u + (-k*m + a(u)'gamma)

where ``a(u)`` indicates the changepoints ``s_j <= u`` and ``gamma_j = -s_j delta_j``.
Equivalently ``z(u) = k (u - m) + sum_j delta_j (u - s_j)_+``, a continuous
piecewise-linear exponent, so ``g`` is continuous at every changepoint. This is
the same family as writing the exponent as ``(k + a'delta)(u - (m + a'gamma'))``
with offsets chosen for continuity.

Fitting is MAP estimation under a Laplace(0, tau) prior on the rate changes:
squared error plus ``(1/tau) * sum |delta_j|``, minimized by accelerated
proximal gradient steps with a backtracking line search.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .series import TimeSeries, mape, rmse
from .stattests.ols import polyfit_ols, studentized_outliers

log = logging.getLogger(__name__)


def sigmoid(z):
    """Logistic function; saturates cleanly instead of overflowing."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TrendConfig:
    capacity: float | None = None
    capacity_factor: float = 1.1
    laplace_scale: float = 0.5
    cp_range: float = 0.95
    alpha: float = 0.05
    beta: float = 1.0 / 6.0
    degree: int = 3
    max_epochs: int = 5000
    rel_tol: float = 1e-9

    def __post_init__(self):
        if not self.laplace_scale > 0:
            raise ValueError("laplace_scale must be positive")
        if not 0.0 < self.cp_range <= 1.0:
            raise ValueError("cp_range must lie in (0, 1]")
        if self.capacity_factor <= 1.0 and self.capacity is None:
            raise ValueError("capacity_factor must exceed 1")


@dataclass(frozen=True, eq=False)
class SegSigmoidModel:
    capacity: float
    base_rate: float
    base_offset: float
    changepoints: np.ndarray
    deltas: np.ndarray
    gammas: np.ndarray
    laplace_scale: float = 0.5
    cp_range: float = 0.95
    n_train: int = 2

    def time_of(self, index) -> np.ndarray:
        """Normalized time of integer sample positions (0 = first training sample)."""
        return np.asarray(index, dtype=np.float64) / max(self.n_train - 1, 1)

    def to_dict(self) -> dict:
        return {
            "time_convention": "u = sample_index / (n_train - 1); training span maps to [0, 1]",
            "capacity": self.capacity,
            "base_rate": self.base_rate,
            "base_offset": self.base_offset,
            "changepoints": self.changepoints.tolist(),
            "deltas": self.deltas.tolist(),
            "gammas": self.gammas.tolist(),
            "laplace_scale": self.laplace_scale,
            "cp_range": self.cp_range,
            "n_train": self.n_train,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegSigmoidModel":
        return cls(
            capacity=float(d["capacity"]), base_rate=float(d["base_rate"]),
            base_offset=float(d["base_offset"]),
            changepoints=np.asarray(d["changepoints"], dtype=np.float64),
            deltas=np.asarray(d["deltas"], dtype=np.float64),
            gammas=np.asarray(d["gammas"], dtype=np.float64),
            laplace_scale=float(d.get("laplace_scale", 0.5)),
            cp_range=float(d.get("cp_range", 0.95)), n_train=int(d["n_train"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SegSigmoidModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class TrendFitReport:
    model: SegSigmoidModel
    n_changepoints: int
    train_rmse: float
    train_mape: float
    loss: float = math.nan
    epochs: int = 0
    converged: bool = True
    history: list = field(default_factory=list)


def _exponent(u, k, b, s, deltas):
    """z(u) = k u + b + sum_j delta_j (u - s_j)_+ using prefix sums over sorted s."""
    u = np.asarray(u, dtype=np.float64)
    if s.size == 0:
        return k * u + b
    c = np.searchsorted(s, u, side="right")
    d_cum = np.concatenate([[0.0], np.cumsum(deltas)])
    ds_cum = np.concatenate([[0.0], np.cumsum(deltas * s)])
    return (k + d_cum[c]) * u + b - ds_cum[c]


def _smooth_loss_grad(theta, u, y, s, cap):
    """Squared error and its gradient with respect to (k, b, delta)."""
    k, b, deltas = theta[0], theta[1], theta[2:]
    g = cap * sigmoid(_exponent(u, k, b, s, deltas))
    err = g - y
    loss = float(err @ err)
    dz = 2.0 * err * g * (1.0 - g / cap)
    grad = np.empty_like(theta)
    grad[0] = dz @ u
    grad[1] = dz.sum()
    if s.size:
        first = np.searchsorted(u, s, side="left")
        r0 = np.concatenate([np.cumsum(dz[::-1])[::-1], [0.0]])
        r1 = np.concatenate([np.cumsum((dz * u)[::-1])[::-1], [0.0]])
        grad[2:] = r1[first] - s * r0[first]
    return loss, grad


def fit_loss(k: float, m: float, deltas, u, y, changepoints, capacity: float,
             laplace_scale: float = 0.5) -> tuple[float, np.ndarray]:
    """Penalized fit objective at ``(k, m, delta)`` and its gradient.

    The gradient of ``|delta_j|`` is taken as ``sign(delta_j)`` (0 at 0).
    """
    s = np.asarray(changepoints, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    theta = np.concatenate([[k, -k * m], deltas])
    loss, g = _smooth_loss_grad(theta, np.asarray(u, float), np.asarray(y, float), s, capacity)
    grad = np.empty_like(theta)
    grad[0] = g[0] - m * g[1]
    grad[1] = -k * g[1]
    grad[2:] = g[2:] + np.sign(deltas) / laplace_scale
    return loss + float(np.abs(deltas).sum()) / laplace_scale, grad


def detect_changepoints(trend, alpha: float = 0.05, beta: float = 1.0 / 6.0,
                        cp_range: float = 0.95, degree: int = 3) -> list[int]:
    """Indices whose studentized residual from a polynomial base fit exceeds the threshold.

    Only indices in the first ``cp_range`` of the span are kept.
    """
    y = np.asarray(getattr(trend, "values", trend), dtype=np.float64)
    n = y.size
    if n < 8:
        raise ValueError(f"need at least 8 trend samples, got {n}")
    idx = np.arange(n, dtype=np.float64)
    report = studentized_outliers(polyfit_ols(idx, y, degree), alpha, beta)
    u = idx / (n - 1)
    return sorted(int(i) for i in report.outlier_indices if u[i] <= cp_range)


def _init_params(u, y, cap):
    p = np.clip(y / cap, 1e-6, 1 - 1e-6)
    z = np.log(p / (1 - p))
    A = np.column_stack([u, np.ones_like(u)])
    (k, b), *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(k), float(b)


def _soft(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def fit_segsigmoid(trend, changepoints=(), cfg: TrendConfig = TrendConfig()) -> TrendFitReport:
    """Fit the piecewise-logistic trend with the given candidate changepoints (sample indices)."""
    y = np.asarray(getattr(trend, "values", trend), dtype=np.float64)
    n = y.size
    if n < 2:
        raise ValueError("need at least two trend samples")
    ymax = float(y.max())
    if cfg.capacity is not None:
        cap = float(cfg.capacity)
        if not cap > ymax:
            raise ValueError(f"capacity {cap} must exceed the training maximum {ymax}")
    else:
        if ymax <= 0:
            raise ValueError("logistic trend needs a positive series maximum; shift the data "
                             "or pass an explicit capacity")
        cap = cfg.capacity_factor * ymax
    u = np.arange(n) / (n - 1)
    cps = np.unique(np.asarray(changepoints, dtype=np.int64))
    if cps.size and (cps.min() < 0 or cps.max() >= n):
        raise ValueError("changepoint index outside the training span")
    s = u[cps]
    if s.size and s.max() > cfg.cp_range + 1e-12:
        raise ValueError(f"changepoints beyond cp_range={cfg.cp_range}")

    lam = 1.0 / cfg.laplace_scale
    k0, b0 = _init_params(u, y, cap)
    x = np.concatenate([[k0, b0], np.zeros(s.size)])

    def objective(theta, smooth):
        return smooth + lam * float(np.abs(theta[2:]).sum())

    fx, _ = _smooth_loss_grad(x, u, y, s, cap)
    F = objective(x, fx)
    yk, t = x.copy(), 1.0
    lip = 1.0
    history = [F]
    converged = False
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        fy, gy = _smooth_loss_grad(yk, u, y, s, cap)
        while True:
            step = 1.0 / lip
            cand = yk - step * gy
            cand[2:] = _soft(cand[2:], lam * step)
            d = cand - yk
            fc, _ = _smooth_loss_grad(cand, u, y, s, cap)
            if fc <= fy + gy @ d + 0.5 * lip * (d @ d) + 1e-12 * abs(fy):
                break
            lip *= 2.0
        Fc = objective(cand, fc)
        if Fc > F:
            # momentum overshot: restart from the last accepted point
            yk, t = x.copy(), 1.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        yk = cand + ((t - 1.0) / t_next) * (cand - x)
        rel = abs(F - Fc) / max(abs(F), 1e-300)
        x, F, t = cand, Fc, t_next
        history.append(F)
        lip *= 0.9
        if rel < cfg.rel_tol:
            converged = True
            break
    if not converged:
        log.warning("SegSigmoid fit hit max_epochs=%d; final loss %.6g", cfg.max_epochs, F)

    k, b, deltas = float(x[0]), float(x[1]), x[2:].copy()
    m = -b / k if k != 0 else 0.0
    model = SegSigmoidModel(cap, k, m, s, deltas, -s * deltas, cfg.laplace_scale,
                            cfg.cp_range, n)
    pred = predict_trend(model, u)
    try:
        train_mape = mape(pred, y)
    except ZeroDivisionError:
        train_mape = math.inf
    return TrendFitReport(model, int(s.size), rmse(pred, y), train_mape, F, epoch,
                          converged, history)


def predict_trend(model: SegSigmoidModel, horizon_times) -> np.ndarray:
    """Evaluate the trend at normalized times; past the last changepoint the final rate persists."""
    u = np.asarray(horizon_times, dtype=np.float64)
    z = _exponent(u, model.base_rate, -model.base_rate * model.base_offset,
                  model.changepoints, model.deltas)
    return model.capacity * sigmoid(z)


def fit_trend(trend, cfg: TrendConfig = TrendConfig()) -> TrendFitReport:
    """Detect changepoints on a polynomial base fit, then fit the logistic model."""
    cps = detect_changepoints(trend, cfg.alpha, cfg.beta, cfg.cp_range, cfg.degree)
    return fit_segsigmoid(trend, cps, cfg)


def forecast_trend(model: SegSigmoidModel, horizon: int) -> np.ndarray:
    """Trend values for the ``horizon`` samples after the training span."""
    idx = np.arange(model.n_train, model.n_train + horizon)
    return predict_trend(model, model.time_of(idx))
