"""Least squares via Householder QR, leverage, and externally studentized residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special import t_ppf


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Ordinary least-squares fit.

    For polynomial fits the coefficients refer to powers of the rescaled
    abscissa ``(x - x_shift) / x_scale`` which maps the sample range onto
    [-1, 1]; use :meth:`predict` rather than evaluating them by hand.
    """

    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    sse: float
    hat_diag: np.ndarray
    n: int
    p: int
    degree: int | None = None
    x_shift: float = 0.0
    x_scale: float = 1.0

    def predict(self, x) -> np.ndarray:
        if self.degree is None:
            raise TypeError("predict() is only defined for polynomial fits")
        u = (np.asarray(x, dtype=np.float64) - self.x_shift) / self.x_scale
        return np.vander(u, self.degree + 1, increasing=True) @ self.coefficients


def ols(X, y, rcond: float = 1e-10) -> OlsFit:
    """Fit ``y ~ X`` by QR. Raises :class:`RankDeficientError` for singular designs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"design has {n} rows but response has shape {y.shape}")
    if n < p:
        raise RankDeficientError(f"{n} observations cannot identify {p} coefficients")
    q, r = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.size and diag.min() <= rcond * max(diag.max(), 1e-300):
        raise RankDeficientError(
            f"design matrix is rank deficient (min |R_ii| = {diag.min():.3g})")
    qty = q.T @ y
    coef = np.linalg.solve(r, qty) if p else np.empty(0)
    fitted = q @ qty
    resid = y - fitted
    return OlsFit(coef, fitted, resid, float(resid @ resid), np.sum(q * q, axis=1), n, p)


def polyfit_ols(x, y, degree: int) -> OlsFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be one-dimensional and of equal length")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if x.size <= degree + 1:
        raise ValueError(f"need more than {degree + 1} points for a degree-{degree} fit")
    if np.unique(x).size <= degree:
        raise RankDeficientError(f"only {np.unique(x).size} distinct x values for degree {degree}")
    lo, hi = float(x.min()), float(x.max())
    shift = 0.5 * (lo + hi)
    scale = 0.5 * (hi - lo) if hi > lo else 1.0
    u = (x - shift) / scale
    fit = ols(np.vander(u, degree + 1, increasing=True), y)
    return OlsFit(fit.coefficients, fit.fitted, fit.residuals, fit.sse, fit.hat_diag,
                  fit.n, fit.p, degree, shift, scale)


@dataclass(frozen=True, eq=False)
class OutlierReport:
    studentized: np.ndarray
    bc_threshold: float
    outlier_indices: np.ndarray


def studentized_residuals(fit: OlsFit, zero_tol: float = 1e-9) -> np.ndarray:
    """Externally studentized residuals ``r_i sqrt((n-p-1) / (SSE (1-h_ii) - r_i^2))``.

    Residuals below ``zero_tol`` times the response scale count as exact zeros
    and give ``t_i = 0``. A non-positive denominator with a non-zero residual
    (the point is fit perfectly once deleted) yields ``+-inf``.
    """
    dof = fit.n - fit.p - 1
    if dof < 1:
        raise ValueError(f"no residual degrees of freedom (n={fit.n}, p={fit.p})")
    r = fit.residuals
    scale = max(float(np.max(np.abs(fit.fitted + r))), 1e-300)
    r = np.where(np.abs(r) <= zero_tol * scale, 0.0, r)
    sse = float(r @ r)
    denom = sse * (1.0 - fit.hat_diag) - r * r
    t = np.zeros_like(r)
    live = r != 0.0
    degenerate = live & (denom <= 1e-12 * sse)
    ok = live & ~degenerate
    t[ok] = r[ok] * np.sqrt(dof / denom[ok])
    t[degenerate] = np.copysign(np.inf, r[degenerate])
    return t


def bonferroni_threshold(n: int, p: int, alpha: float = 0.05, beta: float = 1.0 / 6.0) -> float:
    """``beta * t(1 - alpha / (2 n); n - p - 1)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return beta * t_ppf(1.0 - alpha / (2.0 * n), n - p - 1)


def studentized_outliers(fit: OlsFit, alpha: float = 0.05, beta: float = 1.0 / 6.0) -> OutlierReport:
    t = studentized_residuals(fit)
    bc = bonferroni_threshold(fit.n, fit.p, alpha, beta)
    return OutlierReport(t, bc, np.flatnonzero(np.abs(t) > bc))
