"""Lloyd's k-means with k-means++ seeding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 300


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    labels: np.ndarray
    inertia_history: list = field(default_factory=list)
    n_iter: int = 0

    @property
    def K(self) -> int:
        return int(self.centroids.shape[0])

    def predict(self, X) -> np.ndarray:
        return nearest_centroid(self.centroids, X)


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def nearest_centroid(centroids, X) -> np.ndarray:
    """Index of the closest centroid (Euclidean) for each row; ties go to the lower index."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    C = np.asarray(centroids, dtype=np.float64)
    diff = X[:, None, :] - C[None, :, :]
    return np.argmin(np.einsum("nkd,nkd->nk", diff, diff), axis=1)


def _plus_plus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def kmeans_fit(windows, K: int = 4, seed: int = 0, max_iter: int = MAX_ITER) -> KMeansModel:
    X = np.asarray(getattr(windows, "windows", windows), dtype=np.float64)
    n = X.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if n < K:
        raise ValueError(f"cannot form {K} clusters from {n} windows")
    rng = np.random.default_rng(seed)
    C = _plus_plus(X, K, rng)
    labels = np.full(n, -1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        new = nearest_centroid(C, X)
        inertia = float(((X - C[new]) ** 2).sum())
        history.append(inertia)
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            members = labels == k
            if members.any():
                C[k] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point worst served by its centroid
                far = int(np.argmax(((X - C[labels]) ** 2).sum(1)))
                C[k] = X[far]
                labels[far] = k
    labels = nearest_centroid(C, X)
    inertia = float(((X - C[labels]) ** 2).sum())
    return KMeansModel(C, inertia, labels, history, it)
