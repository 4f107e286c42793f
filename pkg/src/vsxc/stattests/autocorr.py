from __future__ import annotations

import numpy as np

from ._result import TestResult
from .special import chi2_sf


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations rho_0 .. rho_max_lag (biased, full-sample denominator)."""
    x = np.asarray(getattr(series, "values", series), dtype=np.float64)
    n = x.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise ValueError("autocorrelation undefined for a constant series")
    return np.array([float(d[: n - k] @ d[k:]) / denom for k in range(max_lag + 1)])


def acf_cutoff(rho: np.ndarray, n: int, z: float = 1.96) -> int:
    """Smallest lag >= 1 whose autocorrelation falls inside the +-z/sqrt(n) band.

    Returns ``len(rho) - 1`` when every lag stays outside the band.
    """
    band = z / np.sqrt(n)
    inside = np.flatnonzero(np.abs(rho[1:]) < band)
    return int(inside[0] + 1) if inside.size else int(rho.size - 1)


def ljung_box(series, lag: int = 1) -> TestResult:
    x = np.asarray(getattr(series, "values", series), dtype=np.float64)
    n = x.size
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if n <= lag + 1:
        raise ValueError(f"series of length {n} too short for lag {lag}")
    rho = acf(x, lag)[1:]
    k = np.arange(1, lag + 1)
    q = n * (n + 2) * float(np.sum(rho ** 2 / (n - k)))
    return TestResult(q, chi2_sf(q, lag), "series is white noise")
