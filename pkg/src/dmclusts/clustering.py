"""Seeded k-means over representation columns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Clustering:
    """Hard assignment of n samples into k clusters."""

    labels: np.ndarray
    k: int
    inertia: float = 0.0
    centroids: np.ndarray | None = None
    inertia_history: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    @property
    def n(self) -> int:
        return self.labels.size


def _sq_dists(P: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared distances between rows of P (n x d) and rows of C (k x d)."""
    d = (P * P).sum(1)[:, None] - 2.0 * P @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(P: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = P.shape[0]
    idx = [int(rng.integers(n))]
    closest = _sq_dists(P, P[idx]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # all remaining mass sits on chosen centres; pick any unused point
            free = np.setdiff1d(np.arange(n), idx)
            nxt = int(rng.choice(free))
        idx.append(nxt)
        closest = np.minimum(closest, _sq_dists(P, P[[nxt]]).ravel())
    return P[idx].copy()


def _lloyd(P, centroids, max_iter):
    k = centroids.shape[0]
    history = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(P, centroids)
        new_labels = d.argmin(1)
        # repair empty clusters with the points farthest from their centroid
        counts = np.bincount(new_labels, minlength=k)
        if np.any(counts == 0):
            own = d[np.arange(len(P)), new_labels]
            for c in np.flatnonzero(counts == 0):
                donors = np.flatnonzero(np.bincount(new_labels, minlength=k)[new_labels] > 1)
                far = donors[np.argmax(own[donors])]
                new_labels[far] = c
                own[far] = 0.0
        for c in range(k):
            centroids[c] = P[new_labels == c].mean(0)
        inertia = float(_sq_dists(P, centroids)[np.arange(len(P)), new_labels].sum())
        history.append(inertia)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
    return new_labels, centroids, history


def kmeans(points: np.ndarray, k: int, max_iter: int = 300, n_init: int = 10,
           seed: int = 0) -> Clustering:
    """k-means++ seeded Lloyd iterations on the columns of *points*.

    Parameters
    ----------
    points : array of shape (K, n)
        One sample per column.
    k : int
        Number of clusters, ``1 <= k <= n``.
    max_iter, n_init : int
        Lloyd iterations per restart and number of restarts; the restart with
        the lowest inertia wins, ties going to the earliest restart.
    seed : int
        Seeds all restarts.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    P = X.T
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n={n}], got {k}")
    if not np.all(np.isfinite(P)):
        raise ValueError("points contain non-finite values")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        centroids = _kmeanspp(P, k, rng)
        labels, centroids, history = _lloyd(P, centroids, max_iter)
        if best is None or history[-1] < best.inertia:
            best = Clustering(labels, k, history[-1], centroids.T.copy(), history)
    return best


def extract_clusterings(H: list, k: int, seed: int = 0, n_init: int = 10,
                        derive_seeds: bool = True, normalize: bool = False) -> list:
    """Run k-means on each representation ``H_m`` and return one Clustering per layer.

    With ``derive_seeds`` layer ``m`` uses ``seed + m``; otherwise every layer
    uses ``seed``. ``normalize`` scales each column to unit L2 norm first.
    """
    out = []
    for m, Hm in enumerate(H):
        pts = np.asarray(Hm, dtype=np.float64)
        if normalize:
            norms = np.linalg.norm(pts, axis=0)
            pts = pts / np.where(norms > 0, norms, 1.0)
        out.append(kmeans(pts, k, n_init=n_init, seed=seed + m if derive_seeds else seed))
    return out
