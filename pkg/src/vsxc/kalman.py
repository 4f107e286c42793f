"""Scalar random-walk Kalman filter used to smooth raw displacement readings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TimeSeries


@dataclass(frozen=True)
class KalmanConfig:
    """Noise variances and optional initial conditions.

    ``init_state`` defaults to the first observation and ``init_cov`` to
    ``measure_var`` when left as ``None``.
    """

    process_var: float = 1.0
    measure_var: float = 16.0
    init_state: float | None = None
    init_cov: float | None = None

    def __post_init__(self):
        if not self.process_var > 0:
            raise ValueError(f"process variance must be positive, got {self.process_var}")
        if not self.measure_var > 0:
            raise ValueError(f"measurement variance must be positive, got {self.measure_var}")
        if self.init_cov is not None and not self.init_cov > 0:
            raise ValueError(f"initial covariance must be positive, got {self.init_cov}")


def kalman_filter(z, cfg: KalmanConfig = KalmanConfig()):
    """Run the forward recursion on raw observations.

    The first sample is the initialization point: its estimate is the initial
    state with the initial covariance, and measurement updates start at the
    second sample. Returns ``(states, gains, covariances)``, one entry per
    observation; the gain at index 0 is reported as 0.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("cannot filter an empty series")
    q, r = cfg.process_var, cfg.measure_var
    x = float(z[0]) if cfg.init_state is None else float(cfg.init_state)
    p = r if cfg.init_cov is None else float(cfg.init_cov)
    states = np.empty_like(z)
    gains = np.empty_like(z)
    covs = np.empty_like(z)
    states[0], gains[0], covs[0] = x, 0.0, p
    for i in range(1, z.size):
        obs = z[i]
        p_prior = p + q
        k = p_prior / (p_prior + r)
        x = x + k * (obs - x)
        p = (1.0 - k) * p_prior
        states[i], gains[i], covs[i] = x, k, p
    return states, gains, covs


def kalman_smooth(series: TimeSeries, cfg: KalmanConfig = KalmanConfig()) -> TimeSeries:
    states, _, _ = kalman_filter(series.values, cfg)
    return series.with_values(states)


def steady_state_cov(q: float, r: float) -> float:
    """Posterior covariance at the fixed point of the scalar Riccati recursion."""
    # P = (P + q) r / (P + q + r)  <=>  P^2 + q P - q r = 0
    return 0.5 * (-q + np.sqrt(q * q + 4.0 * q * r))
