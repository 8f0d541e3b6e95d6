"""Shallow semi-NMF, ``X ~ Z H`` with ``H >= 0`` and ``Z`` of any sign.

Used as the layer-wise pretraining primitive of the deep models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .clustering import kmeans

EPS = 1e-9
PINV_RCOND = 1e-10
INIT_OFFSET = 0.2


def pinv(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Pseudo-inverse truncating singular values below ``1e-10 * s_max``.

    The flag reports whether any singular value was dropped.
    """
    s = np.linalg.svd(A, compute_uv=False)
    truncated = bool(s.size) and bool(np.any(s <= PINV_RCOND * s[0]))
    return np.linalg.pinv(A, rcond=PINV_RCOND), truncated


def pos(A: np.ndarray) -> np.ndarray:
    return (np.abs(A) + A) / 2.0


def neg(A: np.ndarray) -> np.ndarray:
    return (np.abs(A) - A) / 2.0


def multiplicative_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``sqrt(num / (den + eps))`` leaving 0/0 entries at ratio 1."""
    ratio = np.sqrt(num / (den + EPS))
    both_zero = (num == 0) & (den == 0)
    if np.any(both_zero):
        ratio[both_zero] = 1.0
    return ratio


def update_representation(X: np.ndarray, Z: np.ndarray, H: np.ndarray) -> np.ndarray:
    ZtX = Z.T @ X
    ZtZ = Z.T @ Z
    num = pos(ZtX) + neg(ZtZ) @ H
    den = neg(ZtX) + pos(ZtZ) @ H
    return H * multiplicative_ratio(num, den)


def update_basis(X: np.ndarray, H: np.ndarray) -> np.ndarray:
    inv, _ = pinv(H @ H.T)
    return X @ H.T @ inv


def residual(X, Z, H) -> float:
    R = X - Z @ H
    return float(np.einsum("ij,ij->", R, R))


@dataclass
class SemiNmfResult:
    Z: np.ndarray
    H: np.ndarray
    residual: float
    history: list = field(default_factory=list)
    n_iter: int = 0
    degenerate: bool = False


def kmeans_init(X: np.ndarray, K: int, seed: int = 0) -> np.ndarray:
    """Cluster-membership indicator of the columns of X plus a constant offset."""
    labels = kmeans(X, K, seed=seed).labels
    H = np.full((K, X.shape[1]), INIT_OFFSET)
    H[labels, np.arange(X.shape[1])] += 1.0
    return H


def seminmf_fit(X: np.ndarray, K: int, max_iter: int = 500, tol: float = 1e-6,
                seed: int = 0, H_init: np.ndarray | None = None) -> SemiNmfResult:
    """Factorize ``X`` (d x n) as ``Z H`` with ``H`` (K x n) nonnegative.

    ``H`` starts from a k-means membership indicator (offset 0.2) unless
    *H_init* is given, ``Z`` by least squares. Each iteration applies the
    multiplicative ``H`` rule followed by the exact least-squares ``Z`` solve,
    stopping once the relative residual change falls below *tol*.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    d, n = X.shape
    if not 1 <= K <= min(d, n):
        raise ValueError(f"K must be in [1, min(d, n)={min(d, n)}], got {K}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if not np.any(X):
        warnings.warn("semi-NMF of an all-zero matrix: returning zero factors",
                      RuntimeWarning, stacklevel=2)
        return SemiNmfResult(np.zeros((d, K)), np.zeros((K, n)), 0.0, [0.0], 0, True)

    H = kmeans_init(X, K, seed) if H_init is None else np.array(H_init, dtype=np.float64)
    Z = update_basis(X, H)
    history = [residual(X, Z, H)]
    it = 0
    for it in range(1, max_iter + 1):
        H = update_representation(X, Z, H)
        Z = update_basis(X, H)
        history.append(residual(X, Z, H))
        prev, cur = history[-2], history[-1]
        if abs(prev - cur) <= tol * max(prev, 1e-300):
            break
    return SemiNmfResult(Z, H, history[-1], history, it)
