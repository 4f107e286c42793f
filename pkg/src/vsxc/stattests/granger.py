from __future__ import annotations

import numpy as np

from ._result import TestResult
from .ols import ols
from .special import f_sf


def lagged(x: np.ndarray, lag: int) -> np.ndarray:
    """Columns x_{t-1}, ..., x_{t-lag} for t = lag .. n-1."""
    n = x.size
    return np.column_stack([x[lag - i: n - i] for i in range(1, lag + 1)])


def granger_sse(target, cause, lag: int) -> tuple[float, float, int]:
    """Restricted and unrestricted SSE plus the number of regression rows."""
    y = np.asarray(getattr(target, "values", target), dtype=np.float64)
    x = np.asarray(getattr(cause, "values", cause), dtype=np.float64)
    if y.shape != x.shape:
        raise ValueError(f"target and cause lengths differ: {y.size} vs {x.size}")
    if lag < 1:
        raise ValueError("lag must be >= 1")
    rows = y.size - lag
    if rows - 2 * lag - 1 < 1:
        raise ValueError(f"series of length {y.size} too short for a lag-{lag} Granger test")
    ones = np.ones((rows, 1))
    own = lagged(y, lag)
    restricted = ols(np.hstack([ones, own]), y[lag:])
    unrestricted = ols(np.hstack([ones, own, lagged(x, lag)]), y[lag:])
    return restricted.sse, unrestricted.sse, rows


def granger_test(target, cause, lag: int) -> TestResult:
    """F test of whether ``cause``'s lags add explanatory power for ``target``."""
    sse_r, sse_u, rows = granger_sse(target, cause, lag)
    dof = rows - 2 * lag - 1
    if sse_u <= 0.0:
        f = np.inf if sse_r > 0.0 else 0.0
    else:
        f = max(sse_r - sse_u, 0.0) / lag / (sse_u / dof)
    return TestResult(f, f_sf(f, lag, dof), "cause does not Granger-cause target")
