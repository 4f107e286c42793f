import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsxc.residual import clusterlstm as cl
from vsxc.residual.clusterlstm import (ClusterLstmModel, ClusterSizeError, ResidualConfig,
                                       ResidualGateError, clusterlstm_one_step, clusterlstm_predict,
                                       clusterlstm_train, fit_residual, lstm_predict, make_windows)

FAST = ResidualConfig(epochs=5)


def ar1(n, phi=0.8, seed=0):
    r = np.random.default_rng(seed)
    x = np.zeros(n)
    e = r.normal(size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_window_example():
    ws = make_windows(np.arange(1.0, 27.0), 24)
    assert len(ws) == 2
    assert ws.windows[0].tolist() == list(range(1, 25))
    assert ws.next_values.tolist() == [25.0, 26.0]
    with pytest.raises(ValueError):
        make_windows(np.arange(24.0), 24)


@given(st.integers(25, 300))
def test_window_count(n):
    ws = make_windows(np.arange(float(n)))
    assert len(ws) == n - 24 and ws.length == 24
    assert np.array_equal(ws.windows[1:, :-1], ws.windows[:-1, 1:])


@pytest.fixture(scope="module")
def small_model():
    return clusterlstm_train(make_windows(ar1(300)), 3, FAST, seed=0)


def test_predict_horizon_zero(small_model):
    assert clusterlstm_predict(small_model, ar1(30), 0).size == 0


def test_horizon_one_is_one_lookup_one_forward(small_model, monkeypatch):
    calls = {"nearest": 0, "forward": 0}
    real_nc, real_fw = cl.nearest_centroid, cl.lstm_forward

    def nc(*a):
        calls["nearest"] += 1
        return real_nc(*a)

    def fw(*a):
        calls["forward"] += 1
        return real_fw(*a)

    monkeypatch.setattr(cl, "nearest_centroid", nc)
    monkeypatch.setattr(cl, "lstm_forward", fw)
    out = clusterlstm_predict(small_model, ar1(40), 1)
    assert out.shape == (1,)
    assert calls == {"nearest": 1, "forward": 1}


def test_single_cluster_equals_plain_lstm():
    x = ar1(200, seed=3)
    m = clusterlstm_train(make_windows(x), 1, FAST, seed=4)
    mu, sd = m.normalization[0]
    a = clusterlstm_predict(m, x, 12)
    b = lstm_predict(m.lstms[0], mu, sd, x, 12)
    assert np.array_equal(a, b)


def test_losses_and_routing(small_model):
    assert len(small_model.lstms) == small_model.K == 3
    for hist in small_model.losses:
        assert all(b <= a + 1e-6 for a, b in zip(hist, hist[1:]))
    ws = make_windows(ar1(300))
    Xg = small_model.standardize(ws.windows)
    assert np.array_equal(cl.nearest_centroid(small_model.kmeans.centroids, Xg),
                          small_model.kmeans.labels)


def test_seeded_determinism(small_model):
    again = clusterlstm_train(make_windows(ar1(300)), 3, FAST, seed=0)
    assert np.array_equal(again.kmeans.centroids, small_model.kmeans.centroids)
    assert all(np.array_equal(a.flat(), b.flat()) for a, b in zip(again.lstms, small_model.lstms))
    threaded = clusterlstm_train(make_windows(ar1(300)), 3,
                                 ResidualConfig(epochs=5, n_jobs=3), seed=0)
    x = ar1(50, seed=9)
    assert np.array_equal(clusterlstm_predict(threaded, x, 5), clusterlstm_predict(small_model, x, 5))


def test_json_roundtrip(small_model, tmp_path):
    p = tmp_path / "r.json"
    small_model.save(p)
    back = ClusterLstmModel.load(p)
    x = ar1(60, seed=5)
    assert np.array_equal(clusterlstm_predict(back, x, 6), clusterlstm_predict(small_model, x, 6))
    assert set(json.loads(p.read_text())) >= {"centroids", "lstms", "normalization"}


def test_one_step_matches_recursive_base(small_model):
    x = ar1(80, seed=6)
    batch = clusterlstm_one_step(small_model, x)
    assert batch.size == 80 - 24
    for i in (0, 17, 55):
        single = clusterlstm_predict(small_model, x[i: i + 24], 1)[0]
        assert batch[i] == pytest.approx(single, abs=1e-12)


def test_tiny_cluster_aborts():
    x = np.concatenate([np.zeros(100), [50.0], np.zeros(30)])
    with pytest.raises(ClusterSizeError, match="smaller K"):
        clusterlstm_train(make_windows(x + 1e-3 * np.arange(131)), 4, FAST, seed=0)


def test_white_noise_gate():
    wn = np.random.default_rng(11).normal(size=400)
    with pytest.raises(ResidualGateError, match="force"):
        fit_residual(wn, FAST)
    model, gate = fit_residual(wn, FAST, force=True)
    assert gate.p_value >= 0.05 and model.K == 4


def split_eval(x, cfg, seed=0, n_test=200):
    train = x[:-n_test]
    m = clusterlstm_train(make_windows(train), cfg.k, cfg, seed)
    pred = clusterlstm_one_step(m, x[-(n_test + 24):])
    return float(np.sqrt(np.mean((pred - x[-n_test:]) ** 2)))


@pytest.mark.slow
def test_white_noise_floor():
    x = np.random.default_rng(12).normal(size=1200)
    r = split_eval(x, ResidualConfig())
    assert 0.7 * x.std() <= r <= 1.3 * x.std()


@pytest.mark.slow
def test_ar1_beats_variance():
    x = ar1(1200, seed=13)
    assert split_eval(x, ResidualConfig()) < 0.75 * x.std()
