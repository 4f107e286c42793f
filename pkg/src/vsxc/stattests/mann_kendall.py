from __future__ import annotations

import math

import numpy as np

from ._result import TestResult
from .special import norm_sf

MIN_LENGTH = 8
_CHUNK = 2048


def kendall_s(x: np.ndarray) -> int:
    """Sum of sign(x_j - x_i) over all pairs i < j, computed in row blocks."""
    n = x.size
    s = 0
    for start in range(0, n - 1, _CHUNK):
        stop = min(start + _CHUNK, n - 1)
        rows = np.arange(start, stop)
        diff = np.sign(x[None, :] - x[rows, None])
        mask = np.arange(n)[None, :] > rows[:, None]
        s += int(diff[mask].sum())
    return s


def mann_kendall(series) -> TestResult:
    """Two-sided Mann-Kendall trend test with tie-corrected variance and continuity correction."""
    x = np.asarray(getattr(series, "values", series), dtype=np.float64)
    n = x.size
    if n < MIN_LENGTH:
        raise ValueError(f"Mann-Kendall needs at least {MIN_LENGTH} points, got {n}")
    s = kendall_s(x)
    _, counts = np.unique(x, return_counts=True)
    ties = counts[counts > 1].astype(np.float64)
    var = (n * (n - 1) * (2 * n + 5) - float(np.sum(ties * (ties - 1) * (2 * ties + 5)))) / 18.0
    if s > 0 and var > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0 and var > 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    return TestResult(z, 2.0 * norm_sf(abs(z)), "no monotonic trend")
