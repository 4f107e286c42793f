"""Seeded synthetic displacement-like series with known components."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .series import TimeSeries


@dataclass(frozen=True)
class SyntheticSpec:
    """Cubic trend in normalized time ``x = t / (length - 1)`` plus a sinusoid plus AR(1).

    ``regime_sigmas`` switches the AR innovation scale between the listed values
    (a Markov chain with mean dwell ``regime_dwell`` samples); ``None`` keeps it fixed.
    """

    length: int = 2426
    cubic: tuple = (10.0, 0.0, 60.0, -40.0)  # c0 + c1 x + c2 x^2 + c3 x^3
    amplitude: float = 1.5
    period: float = 24.0
    phase: float = np.pi / 24.0
    ar_phi: float = 0.8
    ar_sigma: float = 0.3
    regime_sigmas: tuple | None = None
    regime_dwell: float = 100.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 200:
            raise ValueError(f"length must be >= 200, got {self.length}")
        if len(self.cubic) != 4:
            raise ValueError("cubic needs four coefficients")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not -1.0 < self.ar_phi < 1.0:
            raise ValueError("ar_phi must lie in (-1, 1) for a stationary residual")
        if self.ar_sigma < 0 or self.noise_sigma < 0 or self.amplitude < 0:
            raise ValueError("amplitude and noise levels must be nonnegative")
        if self.regime_sigmas is not None:
            if len(self.regime_sigmas) < 1 or min(self.regime_sigmas) < 0:
                raise ValueError("regime_sigmas must be a nonempty list of nonnegative scales")
            if not self.regime_dwell >= 1:
                raise ValueError("regime_dwell must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cubic"] = list(self.cubic)
        if self.regime_sigmas is not None:
            d["regime_sigmas"] = list(self.regime_sigmas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "cubic" in d:
            d["cubic"] = tuple(d["cubic"])
        if d.get("regime_sigmas") is not None:
            d["regime_sigmas"] = tuple(d["regime_sigmas"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    series: TimeSeries
    trend: np.ndarray
    periodic: np.ndarray
    residual: np.ndarray
    noise: np.ndarray
    regimes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def regime_ar1(n: int, phi: float, sigmas, dwell: float, rng: np.random.Generator):
    """AR(1) whose innovation scale follows a Markov chain over ``sigmas``.

    Returns the path and the regime index of every sample.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    switch = rng.random(n) < 1.0 / dwell
    picks = rng.integers(sigmas.size, size=n)
    eps = rng.standard_normal(n)
    regimes = np.empty(n, dtype=np.int64)
    r = int(picks[0])
    for t in range(n):
        if switch[t]:
            r = int(picks[t])
        regimes[t] = r
    x = np.empty(n)
    prev = 0.0
    scaled = sigmas[regimes] * eps
    for t in range(n):
        prev = phi * prev + scaled[t]
        x[t] = prev
    return x, regimes


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticData:
    n = spec.length
    rng = np.random.default_rng(spec.seed)
    x = np.arange(n) / (n - 1)
    c0, c1, c2, c3 = spec.cubic
    trend = c0 + x * (c1 + x * (c2 + x * c3))
    t = np.arange(n, dtype=np.float64)
    periodic = spec.amplitude * np.sin(2.0 * np.pi * t / spec.period + spec.phase)
    sigmas = spec.regime_sigmas if spec.regime_sigmas is not None else (spec.ar_sigma,)
    residual, regimes = regime_ar1(n, spec.ar_phi, sigmas, spec.regime_dwell, rng)
    noise = spec.noise_sigma * rng.standard_normal(n)
    y = trend + periodic + residual + noise
    return SyntheticData(TimeSeries.from_values(y), trend, periodic, residual, noise, regimes)
