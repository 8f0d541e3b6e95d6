"""Deep semi-NMF on the concatenated views, one clustering per layer.

The baseline has no view weighting and no redundancy penalty. Fine-tuning
reuses the DMClusts update rules on a single stacked view: every basis is
solved against the deepest reconstruction ``X ~ Z_1 ... Z_M H_M`` only, and
each intermediate ``H_l`` is refreshed as the semi-NMF code of ``X`` under the
current chain ``Z_1 ... Z_l`` so it can be clustered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import FactorState, SolverConfig
from .dataset import MultiViewDataset
from .seminmf import seminmf_fit


@dataclass
class DmfState:
    Z: list
    H: list
    history: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def concat_views(ds: MultiViewDataset) -> np.ndarray:
    """Stack the views vertically into a ``(sum d_v) x n`` matrix."""
    return np.vstack(ds.views)


def _deep_residual(state: FactorState, X: np.ndarray) -> float:
    R = X - state.chain(0, state.M - 1) @ state.H[-1]
    return float(np.einsum("ij,ij->", R, R))


def dmf_fit(ds: MultiViewDataset, cfg: SolverConfig) -> DmfState:
    """Pretrain layer by layer, then fine-tune the whole chain.

    Only ``layer_sizes``, ``max_iter``, ``tol``, ``seed`` and
    ``pretrain_iter`` of *cfg* are used.
    """
    cfg.validate(ds)
    X = concat_views(ds)
    if cfg.M == 1:
        # a single layer is exactly the pretraining problem, already solved
        res = seminmf_fit(X, cfg.layer_sizes[0], max_iter=cfg.pretrain_iter, seed=cfg.seed)
        return DmfState([res.Z], [res.H], list(res.history), res.n_iter, True)

    flat = MultiViewDataset((X,))
    state = core.pretrain(flat, cfg) if cfg.pretrain else core.random_init(flat, cfg)
    M = state.M
    deep_only = np.zeros((M, 1))
    deep_only[-1] = 1.0
    ones = np.ones((M, 1))

    history = [_deep_residual(state, X)]
    converged = False
    t = 0
    for t in range(1, cfg.max_iter + 1):
        for m in range(M):
            state.Z[0][m] = core.update_Z(state, flat, cfg, m, 0, alpha=deep_only)
            state.H[m] = core.update_H(state, flat, cfg, m, alpha=ones, lam=0.0)
        history.append(_deep_residual(state, X))
        prev = history[-2]
        if abs(prev - history[-1]) / max(prev, 1e-12) < cfg.tol:
            converged = True
            break
    return DmfState([z for z in state.Z[0]], state.H, history, t, converged)
