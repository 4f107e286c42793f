import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsxc.kalman import KalmanConfig, kalman_filter, kalman_smooth, steady_state_cov
from vsxc.series import TimeSeries


def unrolled(z, q, r):
    # independent scalar recursion, written out without the library
    x, p = z[0], r
    out = [x]
    for obs in z[1:]:
        pp = p + q
        k = pp / (pp + r)
        x = x + k * (obs - x)
        p = (1 - k) * pp
        out.append(x)
    return np.array(out)


def test_hand_example():
    states, gains, covs = kalman_filter([0.0, 16.0], KalmanConfig(1.0, 16.0, 0.0, 16.0))
    assert gains[1] == pytest.approx(17 / 33, abs=1e-15)
    assert states[1] == pytest.approx(16 * 17 / 33, abs=1e-12)


def test_constant_series_converges():
    out = kalman_smooth(TimeSeries.from_values([5.0, 5, 5, 5]))
    assert abs(out.values[-1] - 5.0) < 1e-9


def test_large_q_tracks_observations(rng):
    z = rng.normal(10, 3, 50)
    out = kalman_smooth(TimeSeries.from_values(z), KalmanConfig(process_var=1e12))
    assert np.max(np.abs(out.values - z) / np.abs(z)) < 1e-6


def test_matches_unrolled(rng):
    z = rng.normal(size=10) * 4
    states, _, _ = kalman_filter(z, KalmanConfig(1.0, 16.0))
    assert np.max(np.abs(states - unrolled(z, 1.0, 16.0))) < 1e-12


def test_length_and_timestamps_kept():
    s = TimeSeries(np.arange(0, 50 * 3600, 3600), np.linspace(0, 1, 50))
    out = kalman_smooth(s)
    assert len(out) == len(s)
    assert np.array_equal(out.timestamps, s.timestamps)


def test_invalid_config():
    with pytest.raises(ValueError):
        KalmanConfig(process_var=0.0)
    with pytest.raises(ValueError):
        KalmanConfig(measure_var=-1.0)
    with pytest.raises(ValueError):
        kalman_filter([])


def test_riccati_fixed_point():
    _, gains, covs = kalman_filter(np.zeros(201), KalmanConfig(1.0, 16.0))
    p_star = steady_state_cov(1.0, 16.0)
    assert abs(covs[200] - p_star) < 1e-9
    assert p_star == pytest.approx((p_star + 1) * 16 / (p_star + 1 + 16), abs=1e-12)
    assert np.all((gains[1:] > 0) & (gains[1:] < 1))


@given(st.integers(0, 2 ** 32 - 1))
def test_smoothing_reduces_difference_variance(seed):
    r = np.random.default_rng(seed)
    t = np.arange(300)
    z = np.sin(t / 20) + r.normal(0, 2.0, t.size)
    f = kalman_smooth(TimeSeries.from_values(z)).values
    assert np.var(np.diff(f)) < np.var(np.diff(z))
