"""DMClusts: multiple clusterings from multi-view data by deep semi-NMF.

Every view ``v`` is factorized layer by layer, ``X_v ~ Z_1^v ... Z_m^v H_m``,
with the representations ``H_m`` shared across views. Layer ``m`` weights the
views by ``alpha[m, v] ** r`` and a balanced redundancy penalty between the
co-association matrices ``H_m^T H_m`` of different layers drives the layers
apart, so k-means on each ``H_m`` yields a different clustering.

Layers and views are 0-indexed throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import MultiViewDataset
from .seminmf import (EPS, INIT_OFFSET, multiplicative_ratio, neg, pinv, pos,
                      seminmf_fit)

logger = logging.getLogger(__name__)

THETA_FLOOR = 1e-12


class ConfigError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Hyperparameters of a DMClusts (or deep semi-NMF) run.

    ``layer_sizes`` gives K_1..K_M, one layer per clustering; ``lam`` weighs
    the redundancy penalty, ``beta`` balances its same-cluster and
    different-cluster parts and ``r`` sharpens the view weights.
    """

    layer_sizes: tuple
    k: int
    lam: float = 0.01
    beta: float = 0.4
    r: float = 0.5
    max_iter: int = 100
    tol: float = 1e-5
    seed: int = 0
    pretrain: bool = True
    pretrain_iter: int = 500
    n_init: int = 10
    normalize: str = "none"
    M: int | None = None

    def __post_init__(self):
        self.layer_sizes = tuple(int(K) for K in self.layer_sizes)
        if self.M is None:
            self.M = len(self.layer_sizes)
        self.validate()

    def validate(self, ds: MultiViewDataset | None = None) -> None:
        sizes = self.layer_sizes
        if len(sizes) == 0 or self.M != len(sizes):
            raise ConfigError(f"need exactly M={self.M} layer sizes, got {len(sizes)}")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if sizes[-1] < self.k:
            raise ConfigError(f"deepest layer K_M={sizes[-1]} is smaller than k={self.k}")
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"layer sizes must be non-increasing: {sizes}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.r > 0 or self.r == 1:
            raise ConfigError(f"r must be positive and != 1, got {self.r}")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if not self.tol >= 0:
            raise ConfigError("tol must be >= 0")
        if ds is not None:
            if sizes[0] > min(ds.dims):
                raise ConfigError(
                    f"K_1={sizes[0]} exceeds the smallest view dimension {min(ds.dims)}")
            if sizes[0] > ds.n:
                raise ConfigError(f"K_1={sizes[0]} exceeds n={ds.n}")


@dataclass
class FactorState:
    """Basis chains ``Z[v][l]``, shared representations ``H[m]``, weights ``alpha[m, v]``."""

    Z: list
    H: list
    alpha: np.ndarray
    diagnostics: dict = field(default_factory=lambda: {"pinv_truncations": 0})

    @property
    def M(self) -> int:
        return len(self.H)

    @property
    def V(self) -> int:
        return len(self.Z)

    def chain(self, v: int, m: int) -> np.ndarray:
        """``Z_1^v ... Z_m^v`` for 0-based layer index *m* (inclusive)."""
        P = self.Z[v][0]
        for l in range(1, m + 1):
            P = P @ self.Z[v][l]
        return P

    def copy(self) -> "FactorState":
        return FactorState([[z.copy() for z in zs] for zs in self.Z],
                           [h.copy() for h in self.H], self.alpha.copy(),
                           dict(self.diagnostics))


@dataclass
class ObjectiveBreakdown:
    total: float
    reconstruction: np.ndarray  # (M, V) weighted residuals
    redundancy: float

    def as_row(self) -> dict:
        return {"total": self.total,
                "reconstruction": float(self.reconstruction.sum()),
                "redundancy": self.redundancy}


# --------------------------------------------------------------------------
# redundancy terms
# --------------------------------------------------------------------------

def _check_pair(Ha, Hb):
    if Ha.shape[1] != Hb.shape[1]:
        raise ValueError(f"column count mismatch: {Ha.shape[1]} vs {Hb.shape[1]}")


def redundancy_overlap(Ha: np.ndarray, Hb: np.ndarray) -> float:
    """``tr(Ha^T Ha Hb^T Hb)``, evaluated as ``||Ha Hb^T||_F^2`` in O(Ka Kb n)."""
    Ha = np.asarray(Ha, dtype=np.float64)
    Hb = np.asarray(Hb, dtype=np.float64)
    _check_pair(Ha, Hb)
    C = Ha @ Hb.T
    return float(np.einsum("ij,ij->", C, C))


def redundancy_balanced(Ha: np.ndarray, Hb: np.ndarray, beta: float) -> float:
    """Balanced redundancy between two representations.

    ``beta * tr(Ga Gb) + (1 - beta) * tr((1 - Ga)(1 - Gb))`` where ``G = H^T H``
    and ``1`` is the n x n all-ones matrix. The second trace expands to
    ``n^2 - sum(Ga) - sum(Gb) + tr(Ga Gb)`` and ``sum(G) = ||H 1||^2``, so no
    n x n matrix is formed.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    Ha = np.asarray(Ha, dtype=np.float64)
    Hb = np.asarray(Hb, dtype=np.float64)
    _check_pair(Ha, Hb)
    n = Ha.shape[1]
    overlap = redundancy_overlap(Ha, Hb)
    sa = Ha.sum(axis=1)
    sb = Hb.sum(axis=1)
    apart = float(n) * n - sa @ sa - sb @ sb + overlap
    return beta * overlap + (1.0 - beta) * apart


def _gamma(H: list, m: int, beta: float) -> np.ndarray:
    Hm = H[m]
    G = np.zeros_like(Hm)
    rowsum = Hm.sum(axis=1, keepdims=True)
    for mp, Hp in enumerate(H):
        if mp == m:
            continue
        G += (Hm @ Hp.T) @ Hp
        G -= (1.0 - beta) * rowsum  # broadcasts H_m 1_{n x n}
    return G


def redundancy_gradient(state: FactorState, cfg: SolverConfig, m: int) -> np.ndarray:
    """Gradient in ``H_m`` of ``sum_{m' != m} R(H_m, H_m')`` (no lambda factor)."""
    return 2.0 * _gamma(state.H, m, cfg.beta)


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------

def view_residuals(state: FactorState, ds: MultiViewDataset, m: int) -> np.ndarray:
    """``Theta[v] = ||X_v - Z_1^v ... Z_m^v H_m||_F^2`` for every view."""
    out = np.empty(ds.V)
    for v, X in enumerate(ds.views):
        R = X - state.chain(v, m) @ state.H[m]
        out[v] = np.einsum("ij,ij->", R, R)
    return out


def objective(state: FactorState, ds: MultiViewDataset, cfg: SolverConfig) -> ObjectiveBreakdown:
    """Weighted reconstruction over all (layer, view) plus lambda times the
    balanced redundancy summed over unordered layer pairs."""
    M, V = state.M, state.V
    recon = np.empty((M, V))
    for v, X in enumerate(ds.views):
        P = None
        for m in range(M):
            P = state.Z[v][0] if P is None else P @ state.Z[v][m]
            R = X - P @ state.H[m]
            recon[m, v] = state.alpha[m, v] ** cfg.r * np.einsum("ij,ij->", R, R)
    red = 0.0
    for m in range(M):
        for mp in range(m + 1, M):
            red += redundancy_balanced(state.H[m], state.H[mp], cfg.beta)
    red *= cfg.lam
    total = float(recon.sum() + red)
    if not np.isfinite(total):
        raise FloatingPointError("objective is not finite")
    return ObjectiveBreakdown(total, recon, float(red))


# --------------------------------------------------------------------------
# update rules
# --------------------------------------------------------------------------

def update_Z(state: FactorState, ds: MultiViewDataset, cfg: SolverConfig, m: int, v: int,
             alpha: np.ndarray | None = None) -> np.ndarray:
    """Closed-form minimizer of the layer-``m`` basis of view ``v``.

    Solves ``sum_{i >= m} w_i ||X_v - Phi Z H_mi||^2`` with ``Phi`` the product
    of the shallower bases, ``H_mi = Z_{m+1} ... Z_i H_i`` and
    ``w_i = alpha[i, v] ** r``. *alpha* overrides ``state.alpha`` (shape (M, V)).
    """
    alpha = state.alpha if alpha is None else alpha
    X = ds.views[v]
    Zv = state.Z[v]
    M = state.M
    w = alpha[:, v] ** cfg.r

    if m == 0:
        PhiT_X = X
        inv_left = None
    else:
        Phi = Zv[0]
        for l in range(1, m):
            Phi = Phi @ Zv[l]
        inv_left, flag = pinv(Phi.T @ Phi)
        state.diagnostics["pinv_truncations"] += flag
        PhiT_X = Phi.T @ X

    K_prev, K_m = Zv[m].shape
    B = np.zeros((K_prev, K_m))
    C = np.zeros((K_m, K_m))
    # link = Z_{m+1} ... Z_i, grown one factor per deeper layer
    link = np.eye(K_m)
    for i in range(m, M):
        if i > m:
            link = link @ Zv[i]
        if w[i] == 0:
            continue
        Hmi = link @ state.H[i]
        B += w[i] * (PhiT_X @ Hmi.T)
        C += w[i] * (Hmi @ Hmi.T)
    inv_right, flag = pinv(C)
    state.diagnostics["pinv_truncations"] += flag
    Znew = B @ inv_right
    if inv_left is not None:
        Znew = inv_left @ Znew
    return Znew


def update_H(state: FactorState, ds: MultiViewDataset, cfg: SolverConfig, m: int,
             alpha: np.ndarray | None = None, lam: float | None = None) -> np.ndarray:
    """Multiplicative update of the shared representation ``H_m``.

    ``H <- H * sqrt((Q+ + P- H + lam Gamma-) / (Q- + P+ H + lam Gamma+))`` with
    ``Q = sum_v w_v A_v^T X_v``, ``P = sum_v w_v A_v^T A_v`` over the full
    chains ``A_v = Z_1^v ... Z_m^v``. Entries with a zero numerator and zero
    denominator are left unchanged.
    """
    alpha = state.alpha if alpha is None else alpha
    lam = cfg.lam if lam is None else lam
    Hm = state.H[m]
    K = Hm.shape[0]
    Q = np.zeros_like(Hm)
    P = np.zeros((K, K))
    for v, X in enumerate(ds.views):
        w = alpha[m, v] ** cfg.r
        if w == 0:
            continue
        A = state.chain(v, m)
        Q += w * (A.T @ X)
        P += w * (A.T @ A)
    num = pos(Q) + neg(P) @ Hm
    den = neg(Q) + pos(P) @ Hm
    if lam and state.M > 1:
        G = _gamma(state.H, m, cfg.beta)
        num += lam * neg(G)
        den += lam * pos(G)
    Hnew = Hm * multiplicative_ratio(num, den)
    if not np.all(np.isfinite(Hnew)):
        raise FloatingPointError(f"non-finite entries in H update of layer {m}")
    return Hnew


def alpha_from_residuals(theta: np.ndarray, r: float) -> np.ndarray:
    """View weights ``(r Theta_v)^(1/(1-r))`` normalized to sum to one.

    Zero residuals are floored at 1e-12; evaluated in log space so sharp
    exponents (r near 1) cannot overflow.
    """
    theta = np.maximum(np.asarray(theta, dtype=np.float64), THETA_FLOOR)
    logw = np.log(r * theta) / (1.0 - r)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def update_alpha(state: FactorState, ds: MultiViewDataset, cfg: SolverConfig, m: int) -> np.ndarray:
    return alpha_from_residuals(view_residuals(state, ds, m), cfg.r)


# --------------------------------------------------------------------------
# initialization and the alternating loop
# --------------------------------------------------------------------------

def _split_rows(Z: np.ndarray, dims: list) -> list:
    return np.split(Z, np.cumsum(dims)[:-1], axis=0)


def pretrain(ds: MultiViewDataset, cfg: SolverConfig) -> FactorState:
    """Layer-wise semi-NMF initialization.

    Layer 1 factorizes the stacked views, giving a shared ``H_1`` and one block
    of ``Z_1`` per view; layer ``l`` factorizes ``H_{l-1}`` and copies ``Z_l``
    to every view. View weights start uniform.
    """
    cfg.validate(ds)
    V = ds.V
    res = seminmf_fit(np.vstack(ds.views), cfg.layer_sizes[0],
                      max_iter=cfg.pretrain_iter, seed=cfg.seed)
    Z = [[blk] for blk in _split_rows(res.Z, ds.dims)]
    H = [res.H]
    for l, K in enumerate(cfg.layer_sizes[1:], start=1):
        res = seminmf_fit(H[-1], K, max_iter=cfg.pretrain_iter, seed=cfg.seed + l)
        for v in range(V):
            Z[v].append(res.Z.copy())
        H.append(res.H)
    return FactorState(Z, H, np.full((cfg.M, V), 1.0 / V))


def random_init(ds: MultiViewDataset, cfg: SolverConfig) -> FactorState:
    """Seeded random ``H`` with least-squares bases, for runs without pretraining."""
    cfg.validate(ds)
    rng = np.random.default_rng(cfg.seed)
    H = [rng.random((K, ds.n)) + INIT_OFFSET for K in cfg.layer_sizes]
    Z = []
    for X in ds.views:
        chain = []
        target = X
        for l in range(cfg.M):
            inv, _ = pinv(H[l] @ H[l].T)
            chain.append(target @ H[l].T @ inv)
            target = H[l]
        Z.append(chain)
    return FactorState(Z, H, np.full((cfg.M, ds.V), 1.0 / ds.V))


def rescale_layer(state: FactorState, m: int) -> float:
    """Scale ``H_m`` to ``||H_m||_F^2 = n``, absorbing the factor into the
    neighbouring bases so every reconstruction is unchanged."""
    Hm = state.H[m]
    norm = np.linalg.norm(Hm)
    if norm == 0:
        return 1.0
    c = norm / np.sqrt(Hm.shape[1])
    state.H[m] = Hm / c
    for zs in state.Z:
        zs[m] = zs[m] * c
        if m + 1 < len(zs):
            zs[m + 1] = zs[m + 1] / c
    return c


def normalize_basis(state: FactorState, m: int, weights=None) -> np.ndarray:
    """Give the layer-``m`` chains unit-norm columns and move the scale into ``H_m``.

    Column norms are taken over all views stacked (optionally weighted);
    ``Z_m`` and ``Z_{m+1}`` absorb the inverse scaling, so every
    reconstruction is unchanged.
    """
    V = state.V
    w = np.ones(V) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones(V)
    sq = sum(w[v] * (state.chain(v, m) ** 2).sum(axis=0) for v in range(V)) / w.sum()
    d = np.sqrt(sq)
    d[d == 0] = 1.0
    state.H[m] = state.H[m] * d[:, None]
    for zs in state.Z:
        zs[m] = zs[m] / d[None, :]
        if m + 1 < len(zs):
            zs[m + 1] = zs[m + 1] * d[:, None]
    return d


def _sweep(state, ds, cfg, callback):
    for m in range(state.M):
        for v in range(state.V):
            state.Z[v][m] = update_Z(state, ds, cfg, m, v)
        if callback:
            callback("Z", m, state)
        state.H[m] = update_H(state, ds, cfg, m)
        if cfg.normalize == "frobenius":
            rescale_layer(state, m)
        elif cfg.normalize == "basis":
            normalize_basis(state, m, state.alpha[m] ** cfg.r)
        if callback:
            callback("H", m, state)
        state.alpha[m] = update_alpha(state, ds, cfg, m)
        if callback:
            callback("alpha", m, state)


@dataclass
class FitResult:
    state: FactorState
    history: list
    n_iter: int
    converged: bool

    @property
    def objective_rows(self) -> list:
        return [dict(iteration=t, **h.as_row()) for t, h in enumerate(self.history)]


def fit(ds: MultiViewDataset, cfg: SolverConfig, init: FactorState | None = None,
        callback: Callable | None = None) -> FitResult:
    """Alternate Z, H and alpha updates until the objective settles.

    One sweep visits layers in ascending order and, at each layer, updates
    every view's basis, then the shared representation, then the view
    weights. ``history[0]`` is the objective of the initial state and one
    entry follows per sweep. The loop stops when the relative change drops
    below ``cfg.tol`` or after ``cfg.max_iter`` sweeps.

    *callback*, if given, is called as ``callback(kind, m, state)`` after
    every single update (``kind`` in ``{"Z", "H", "alpha"}``).
    """
    cfg.validate(ds)
    if init is not None:
        state = init.copy()
    elif cfg.pretrain:
        state = pretrain(ds, cfg)
    else:
        state = random_init(ds, cfg)

    history = [objective(state, ds, cfg)]
    converged = False
    t = 0
    for t in range(1, cfg.max_iter + 1):
        try:
            # overflow surfaces as a non-finite value, reported below
            with np.errstate(over="ignore", invalid="ignore"):
                _sweep(state, ds, cfg, callback)
                ob = objective(state, ds, cfg)
        except FloatingPointError as exc:
            raise DivergenceError(str(exc), t) from None
        history.append(ob)
        prev = history[-2].total
        change = abs(ob.total - prev) / max(abs(prev), 1e-12)
        logger.debug("iter %d objective %.6g (rel change %.3g)", t, ob.total, change)
        if change < cfg.tol:
            converged = True
            break
    return FitResult(state, history, t, converged)
