import time

import numpy as np
import pytest

from vsxc.series import TimeSeries
from vsxc.vmd import VmdError, VmdParams, from_components, reconstruct, vmd_decompose


def ramp_plus_sine(n=2048, seed=0):
    t = np.arange(n)
    clean = np.sin(2 * np.pi * 10 * t / n)
    eps = np.random.default_rng(seed).normal(0, 0.01, n)
    return 0.5 * t / n + clean + eps, clean


def test_line_goes_to_trend():
    y = 3.0 * np.linspace(0, 1, 512)
    d = vmd_decompose(TimeSeries.from_values(y), VmdParams(alpha=2000))
    T, S, R = d.components()
    energy = np.sum(y ** 2)
    assert np.sum(T ** 2) / energy > 0.99
    assert np.sum(S ** 2) / energy < 0.01 and np.sum(R ** 2) / energy < 0.01


def test_sinusoid_lands_in_mode_one():
    y, clean = ramp_plus_sine()
    d = vmd_decompose(TimeSeries.from_values(y), VmdParams(alpha=2000))
    assert np.corrcoef(d.periodic.values, clean)[0, 1] > 0.95


@pytest.mark.parametrize("seed", [0, 1])
def test_low_alpha_reconstructs(seed):
    y = np.random.default_rng(seed).normal(size=700).cumsum()
    d = vmd_decompose(TimeSeries.from_values(y), VmdParams(alpha=13.625, tau=0.99877))
    assert d.recon_mse < np.var(y) * 1e-3


def test_invariants(rng):
    y = rng.normal(size=300).cumsum() + np.sin(np.arange(300) / 3)
    s = TimeSeries.from_values(y)
    d = vmd_decompose(s)
    T, S, R = d.components()
    assert T.size == S.size == R.size == y.size
    assert abs(d.recon_mse - np.mean((T + S + R - y) ** 2)) < 1e-12
    assert np.all(np.diff(d.center_freqs) >= 0)
    assert d.center_freqs[0] < 0.5 / y.size
    assert np.max(np.abs(d.modes)) <= 3 * np.max(np.abs(y))
    again = vmd_decompose(s)
    assert np.array_equal(again.modes, d.modes)
    rec = reconstruct(d).values
    assert abs(np.mean((rec - y) ** 2) - d.recon_mse) < 1e-12


def test_recon_history_settles_on_converged_run():
    y, _ = ramp_plus_sine(512)
    d = vmd_decompose(TimeSeries.from_values(y), VmdParams(alpha=500, tol=1e-6, max_iter=2000),
                      track=True)
    assert d.converged
    tail = d.residual_history[-10:]
    assert np.all(np.diff(tail) <= 1e-9)


def test_reconstruct_examples():
    base = TimeSeries.from_values([0.0, 0.0])
    d = from_components(base, [1, 2], [0, 1], [1, 0])
    assert reconstruct(d).values.tolist() == [2.0, 3.0]
    z = from_components(base, [0, 0], [0, 0], [0, 0])
    assert reconstruct(z).values.tolist() == [0.0, 0.0]


def test_errors():
    with pytest.raises(VmdError):
        vmd_decompose(TimeSeries.from_values(np.ones(10)))
    with pytest.raises(ValueError):
        VmdParams(alpha=0)
    with pytest.raises(ValueError):
        VmdParams(max_iter=0)


def test_runtime_budget():
    y, _ = ramp_plus_sine()
    t0 = time.perf_counter()
    vmd_decompose(TimeSeries.from_values(y), VmdParams(alpha=2000))
    assert time.perf_counter() - t0 < 10
