"""Discrete Fourier transforms written on top of numpy array arithmetic.

Power-of-two lengths use an iterative radix-2 decimation-in-time scheme where
each stage is a single vectorized butterfly. Other lengths go through
Bluestein's chirp-z identity, which re-expresses the DFT as a convolution that
is evaluated with power-of-two transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    # Row r of X holds the DFT (length X.shape[0]) of the subsequence x[r::stride].
    X = x.reshape(1, n).astype(np.complex128)
    while X.shape[0] < n:
        half = X.shape[1] // 2
        even, odd = X[:, :half], X[:, half:]
        m = X.shape[0]
        tw = np.exp(-1j * np.pi * np.arange(m) / m)[:, None]
        X = np.vstack([even + tw * odd, even - tw * odd])
    return X.ravel()


def _bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp phase argument small for large n
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    m = next_pow2(2 * n - 1)
    a = np.zeros(m, dtype=np.complex128)
    a[:n] = x * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    conv = _ifft_pow2(_fft_pow2(a) * _fft_pow2(b))
    return chirp * conv[:n]


def _ifft_pow2(X: np.ndarray) -> np.ndarray:
    return np.conj(_fft_pow2(np.conj(X))) / X.shape[0]


def fft(x) -> np.ndarray:
    """Forward DFT of any length, ``X[k] = sum_n x[n] exp(-2 pi i k n / N)``."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot transform an empty signal")
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    return _bluestein(x)


def ifft(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128).ravel()
    if X.shape[0] == 0:
        raise ValueError("cannot transform an empty spectrum")
    return np.conj(fft(np.conj(X))) / X.shape[0]


def dft_naive(x) -> np.ndarray:
    """O(N^2) reference transform."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    n = x.shape[0]
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) @ x


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Forward transform of a real signal zero-padded to a power of two."""

    coeffs: np.ndarray
    n_samples: int

    @property
    def size(self) -> int:
        return int(self.coeffs.shape[0])

    def is_hermitian(self, atol: float = 1e-9) -> bool:
        c = self.coeffs
        mirrored = np.conj(np.roll(c[::-1], 1))
        return bool(np.allclose(c, mirrored, atol=atol, rtol=0.0))

    def inverse(self) -> np.ndarray:
        return ifft(self.coeffs).real[: self.n_samples]


def fft_real(signal) -> Spectrum:
    x = np.asarray(signal, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot transform an empty signal")
    padded = np.zeros(next_pow2(x.size))
    padded[: x.size] = x
    return Spectrum(_fft_pow2(padded), int(x.size))
