"""Clustering quality (silhouette, Dunn) and diversity (NMI, Jaccard) indexes.

Quality is measured on a point set with samples as columns; diversity compares
two label vectors. All distances are Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


def _labels(c) -> np.ndarray:
    return np.asarray(getattr(c, "labels", c)).ravel()


def _points(points, labels) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=np.float64)).T
    if P.shape[0] != labels.size:
        raise ValueError(f"{P.shape[0]} points but {labels.size} labels")
    return P


def silhouette(points: np.ndarray, labels) -> float:
    """Mean silhouette ``(b - a) / max(a, b)``; singleton clusters score 0."""
    labels = _labels(labels)
    P = _points(points, labels)
    ids, inv = np.unique(labels, return_inverse=True)
    if ids.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    D = cdist(P, P)
    onehot = np.zeros((labels.size, ids.size))
    onehot[np.arange(labels.size), inv] = 1.0
    sizes = onehot.sum(0)
    sums = D @ onehot  # distance of each point to every cluster, summed
    own = sizes[inv]
    a = sums[np.arange(labels.size), inv] / np.maximum(own - 1, 1)
    mean_other = sums / sizes
    mean_other[np.arange(labels.size), inv] = np.inf
    b = mean_other.min(1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def dunn_index(points: np.ndarray, labels) -> float:
    """Smallest between-cluster point distance over the largest cluster diameter."""
    labels = _labels(labels)
    P = _points(points, labels)
    if np.unique(labels).size < 2:
        raise ValueError("Dunn index needs at least 2 clusters")
    D = cdist(P, P)
    same = labels[:, None] == labels[None, :]
    diameter = D[same].max()
    if diameter <= 0:
        raise ValueError("degenerate clusters: every cluster has zero diameter")
    return float(D[~same].min() / diameter)


def contingency(a, b) -> np.ndarray:
    a, b = _labels(a), _labels(b)
    if a.size != b.size:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Mutual information normalized by ``sqrt(H(a) H(b))`` (natural log, 0/0 -> 0)."""
    table = contingency(a, b)
    n = table.sum()
    ha, hb = _entropy(table.sum(1)), _entropy(table.sum(0))
    if ha == 0 or hb == 0:
        return 0.0
    pij = table / n
    outer = np.outer(table.sum(1), table.sum(0)) / n**2
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


def jaccard(a, b) -> float:
    """Pair-counting Jaccard: pairs together in both over pairs together in either."""
    table = contingency(a, b)
    if table.sum() < 2:
        raise ValueError("Jaccard needs at least 2 samples")
    pairs = lambda x: float((x * (x - 1) / 2.0).sum())
    both = pairs(table)
    union = pairs(table.sum(1)) + pairs(table.sum(0)) - both
    return both / union if union > 0 else 0.0


def match_truth(clusterings: list, truths: list) -> list:
    """Pair each truth labeling with a distinct clustering maximizing total NMI.

    Returns one ``(truth_index, clustering_index, nmi)`` triple per matched
    truth.
    """
    if not clusterings or not truths:
        return []
    S = np.array([[nmi(c, t) for c in clusterings] for t in truths])
    rows, cols = linear_sum_assignment(-S)
    return [(int(i), int(j), float(S[i, j])) for i, j in zip(rows, cols)]


@dataclass
class EvaluationReport:
    sc: list
    di: list
    pairs: list = field(default_factory=list)  # (i, j, nmi, jc)
    truth_match: list | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mean_sc(self) -> float:
        return float(np.mean(self.sc))

    @property
    def mean_di(self) -> float:
        return float(np.mean(self.di))

    @property
    def mean_nmi(self) -> float:
        return float(np.mean([p[2] for p in self.pairs])) if self.pairs else float("nan")

    @property
    def mean_jc(self) -> float:
        return float(np.mean([p[3] for p in self.pairs])) if self.pairs else float("nan")

    def to_dict(self) -> dict:
        out = {
            "quality": {
                "per_clustering": [{"index": i, "sc": s, "di": d}
                                   for i, (s, d) in enumerate(zip(self.sc, self.di))],
                "mean": {"sc": self.mean_sc, "di": self.mean_di},
            },
            "diversity": {
                "pairs": [{"i": i, "j": j, "nmi": a, "jc": b} for i, j, a, b in self.pairs],
                "mean": ({"nmi": self.mean_nmi, "jc": self.mean_jc} if self.pairs else {}),
            },
        }
        if self.truth_match is not None:
            out["truth_match"] = [{"truth": t, "clustering": c, "nmi": v}
                                  for t, c, v in self.truth_match]
        out["meta"] = self.meta
        return out


def evaluate(ds, clusterings: list, truth=None, meta: dict | None = None) -> EvaluationReport:
    """Quality of every clustering in the concatenated raw feature space, and
    NMI/JC for every pair of clusterings."""
    if not clusterings:
        raise ValueError("nothing to evaluate")
    points = np.vstack(ds.views)
    sc = [silhouette(points, c) for c in clusterings]
    di = [dunn_index(points, c) for c in clusterings]
    pairs = [(i, j, nmi(clusterings[i], clusterings[j]), jaccard(clusterings[i], clusterings[j]))
             for i, j in combinations(range(len(clusterings)), 2)]
    tm = match_truth(clusterings, list(truth.labelings)) if truth is not None else None
    meta = dict(meta or {})
    meta.setdefault("quality_space", "concatenated raw features")
    return EvaluationReport(sc, di, pairs, tm, meta)
