import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsxc.fft import dft_naive, fft, fft_real, ifft, next_pow2


@pytest.mark.parametrize("n", [8, 64, 256, 6, 100, 243])
def test_matches_naive_dft(rng, n):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.max(np.abs(fft(x) - dft_naive(x))) < 1e-9


def test_impulse_is_flat():
    spec = fft_real([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(np.abs(spec.coeffs), 1.0)


def test_constant_goes_to_dc():
    c = fft_real([2.5] * 4).coeffs
    assert c[0] == pytest.approx(10.0)
    assert np.allclose(c[1:], 0.0)


def test_cosine_bins():
    n = np.arange(8)
    c = fft_real(np.cos(2 * np.pi * 2 * n / 8)).coeffs
    ref = dft_naive(np.cos(2 * np.pi * 2 * n / 8))
    assert np.allclose(c, ref, atol=1e-12)
    hot = np.flatnonzero(np.abs(c) > 1e-9)
    assert hot.tolist() == [2, 6]


def test_zero_padding_and_hermitian(rng):
    spec = fft_real(rng.normal(size=100))
    assert spec.size == 128
    assert spec.is_hermitian()


def test_empty_raises():
    with pytest.raises(ValueError):
        fft_real([])
    with pytest.raises(ValueError):
        fft([])


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 5, 64, 65)] == [1, 2, 4, 8, 64, 128]


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=300))
def test_roundtrip(vals):
    x = np.array(vals)
    assert np.max(np.abs(fft_real(x).inverse() - x)) < 1e-9
    assert np.max(np.abs(ifft(fft(x)).real - x)) < 1e-9
