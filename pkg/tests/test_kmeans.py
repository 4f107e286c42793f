import numpy as np
import pytest
from hypothesis import given, strategies as st

from vsxc.residual.kmeans import kmeans_fit, nearest_centroid


def test_separated_blobs(rng):
    a = rng.normal(size=(30, 24)) + 100
    b = rng.normal(size=(30, 24)) - 100
    X = np.vstack([a, b])
    m = kmeans_fit(X, 2, seed=0)
    assert len(set(m.labels[:30])) == 1 and len(set(m.labels[30:])) == 1
    assert m.labels[0] != m.labels[30]
    scatter = ((a - a.mean(0)) ** 2).sum() + ((b - b.mean(0)) ** 2).sum()
    assert m.inertia == pytest.approx(scatter, rel=1e-12)


def test_k_equals_n(rng):
    X = rng.normal(size=(7, 24))
    m = kmeans_fit(X, 7, seed=1)
    assert m.inertia == 0.0
    assert sorted(m.labels.tolist()) == list(range(7))


def test_too_few_windows(rng):
    with pytest.raises(ValueError):
        kmeans_fit(rng.normal(size=(3, 24)), 4)


def test_duplicate_points_still_fill_clusters():
    X = np.zeros((10, 3))
    X[0] = 1.0
    m = kmeans_fit(X, 3, seed=0)
    assert m.K == 3 and np.isfinite(m.inertia)


def test_nearest_centroid_tie_goes_low():
    C = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert nearest_centroid(C, [[0.0, 5.0]]).tolist() == [0]


@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_lloyd_invariants(seed, K):
    r = np.random.default_rng(seed)
    X = r.normal(size=(40, 5)) * r.uniform(0.5, 3, size=5)
    m = kmeans_fit(X, K, seed=seed)
    h = m.inertia_history
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(h, h[1:]))
    assert np.array_equal(m.labels, nearest_centroid(m.centroids, X))
    d = ((X[:, None, :] - m.centroids[None]) ** 2).sum(-1).min(1).sum()
    assert abs(m.inertia - d) < 1e-9
    again = kmeans_fit(X, K, seed=seed)
    assert np.array_equal(again.centroids, m.centroids)
