"""Variational mode decomposition (ADMM in the frequency domain).

The signal is mirror-extended to twice its length, transformed, and only the
non-negative half of the spectrum is iterated on. Each sweep updates every
mode with a Wiener-type filter centred on its current frequency, moves the
centre frequency to the power-weighted mean of its spectrum, and takes a dual
ascent step on the reconstruction constraint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fft import fft, ifft
from .series import TimeSeries

log = logging.getLogger(__name__)

MIN_LENGTH = 16


class VmdError(RuntimeError):
    pass


@dataclass(frozen=True)
class VmdParams:
    k_modes: int = 3
    alpha: float = 2000.0
    tau: float = 0.99877
    tol: float = 1e-7
    max_iter: int = 500
    dc_mode: bool = True

    def __post_init__(self):
        if self.k_modes < 1:
            raise ValueError("k_modes must be >= 1")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Trend / periodic / residual split of a series.

    ``modes`` holds every mode ordered by ascending centre frequency. Mode 0 is
    the trend, mode 1 the periodic term, and the remaining modes are summed
    into the residual.
    """

    trend: TimeSeries
    periodic: TimeSeries
    residual: TimeSeries
    center_freqs: np.ndarray
    recon_mse: float
    iterations: int = 0
    converged: bool = True
    modes: np.ndarray | None = None
    residual_history: np.ndarray = field(default_factory=lambda: np.empty(0))

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.trend.values, self.periodic.values, self.residual.values

    def summary(self) -> dict:
        return {
            "center_freqs": [float(w) for w in self.center_freqs],
            "recon_mse": self.recon_mse,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _mirror(f: np.ndarray) -> tuple[np.ndarray, int]:
    n = f.size
    left = n // 2
    ext = np.concatenate([f[:left][::-1], f, f[left:][::-1]])
    return ext, left


def _hermitian_full(half: np.ndarray, size: int) -> np.ndarray:
    """Rebuild a full spectrum of even length ``size`` from bins 0..size/2."""
    full = np.zeros(size, dtype=np.complex128)
    full[: size // 2 + 1] = half
    full[size // 2 + 1:] = np.conj(half[1: size // 2][::-1])
    return full


def vmd_decompose(series: TimeSeries, params: VmdParams = VmdParams(),
                  track: bool = False) -> Decomposition:
    """Split ``series`` into ``params.k_modes`` band-limited modes.

    With ``track=True`` the mean squared reconstruction error of the
    mirrored signal is recorded after every sweep (``residual_history``).
    """
    f = np.asarray(series.values, dtype=np.float64)
    n = f.size
    if n < MIN_LENGTH:
        raise VmdError(f"series too short for decomposition: {n} < {MIN_LENGTH}")

    ext, offset = _mirror(f)
    size = ext.size  # always 2n
    half = size // 2 + 1
    f_hat = fft(ext)[:half]
    freqs = np.arange(half) / size  # cycles per sample, 0 .. 0.5

    K = params.k_modes
    alpha, tau = params.alpha, params.tau
    omega = 0.5 / K * np.arange(K)
    if params.dc_mode:
        omega[0] = 0.0

    u = np.zeros((K, half), dtype=np.complex128)
    lam = np.zeros(half, dtype=np.complex128)
    total = np.zeros(half, dtype=np.complex128)
    history = []
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        u_prev = u.copy()
        for k in range(K):
            others = total - u[k]
            u[k] = (f_hat - others + 0.5 * lam) / (1.0 + 2.0 * alpha * (freqs - omega[k]) ** 2)
            total = others + u[k]
            if not (params.dc_mode and k == 0):
                power = np.abs(u[k]) ** 2
                mass = power.sum()
                if mass > 0:
                    omega[k] = float(freqs @ power / mass)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(omega))):
            raise VmdError(f"non-finite values at iteration {it}")
        lam = lam + tau * (f_hat - total)
        if track:
            gap = _hermitian_full(f_hat - total, size)
            history.append(float(np.sum(np.abs(gap) ** 2) / size ** 2))
        prev_norm = np.sum(np.abs(u_prev) ** 2, axis=1)
        if np.all(prev_norm > 0):
            change = np.sum(np.abs(u - u_prev) ** 2, axis=1) / prev_norm
            if float(change.sum()) < params.tol:
                converged = True
                break
    if not converged:
        log.warning("VMD stopped at max_iter=%d without meeting tol=%g",
                    params.max_iter, params.tol)

    order = np.argsort(omega, kind="stable")
    omega = omega[order]
    u = u[order]
    modes = np.empty((K, n))
    for k in range(K):
        modes[k] = ifft(_hermitian_full(u[k], size)).real[offset: offset + n]
    return _assemble(series, modes, omega, it, converged, np.asarray(history))


def _assemble(series, modes, omega, iterations, converged, history) -> Decomposition:
    n = len(series)
    zeros = np.zeros(n)
    trend = modes[0]
    periodic = modes[1] if modes.shape[0] > 1 else zeros
    residual = modes[2:].sum(axis=0) if modes.shape[0] > 2 else zeros
    err = trend + periodic + residual - series.values
    return Decomposition(
        trend=series.with_values(trend),
        periodic=series.with_values(periodic),
        residual=series.with_values(residual),
        center_freqs=np.asarray(omega, dtype=np.float64),
        recon_mse=float(np.mean(err ** 2)),
        iterations=int(iterations),
        converged=bool(converged),
        modes=modes,
        residual_history=history,
    )


def reconstruct(d: Decomposition) -> TimeSeries:
    t, s, r = d.components()
    return d.trend.with_values(t + s + r)


def from_components(original: TimeSeries, trend, periodic, residual,
                    center_freqs=(0.0, 0.0, 0.0)) -> Decomposition:
    """Wrap externally supplied components (e.g. read back from CSV)."""
    modes = np.vstack([np.asarray(trend, float), np.asarray(periodic, float),
                       np.asarray(residual, float)])
    return _assemble(original, modes, np.asarray(center_freqs, float), 0, True, np.empty(0))
