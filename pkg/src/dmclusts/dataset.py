"""Multi-view datasets: validation, CSV/JSON persistence and synthetic generators.

Views are held internally as ``d_v x n`` arrays (features by samples). On disk
every view is a headerless CSV with one row per sample, so the loader
transposes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or inconsistent multi-view data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultiViewDataset:
    """V feature matrices over the same n samples, view ``v`` shaped ``d_v x n``."""

    views: tuple
    view_names: tuple = ()

    def __post_init__(self):
        views = tuple(_frozen(np.atleast_2d(v)) for v in self.views)
        if len(views) == 0:
            raise DatasetError("a dataset needs at least one view")
        for i, v in enumerate(views):
            if v.ndim != 2:
                raise DatasetError(f"view {i} is not a matrix")
            if v.shape[0] < 1:
                raise DatasetError(f"view {i} is empty (zero features)")
            if not np.all(np.isfinite(v)):
                raise DatasetError(f"view {i} contains non-finite entries")
        counts = {v.shape[1] for v in views}
        if len(counts) != 1:
            raise DatasetError(
                f"sample count mismatch across views: {[v.shape[1] for v in views]}")
        if views[0].shape[1] < 2:
            raise DatasetError("a dataset needs at least 2 samples")
        names = tuple(self.view_names) or tuple(f"view{i}" for i in range(len(views)))
        if len(names) != len(views):
            raise DatasetError("one name per view is required")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "view_names", names)

    @property
    def n(self) -> int:
        return self.views[0].shape[1]

    @property
    def V(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [v.shape[0] for v in self.views]

    def __eq__(self, other):
        if not isinstance(other, MultiViewDataset):
            return NotImplemented
        return (self.view_names == other.view_names
                and len(self.views) == len(other.views)
                and all(np.array_equal(a, b) for a, b in zip(self.views, other.views)))

    __hash__ = None


@dataclass(frozen=True)
class PlantedTruth:
    """Ground-truth labelings of a synthetic dataset and the views encoding each."""

    labelings: tuple
    view_assignment: tuple = field(default=())

    def __post_init__(self):
        labelings = []
        for lab in self.labelings:
            lab = np.array(lab, dtype=np.int64, copy=True)
            if lab.ndim != 1 or (lab.size and lab.min() < 0):
                raise DatasetError("labels must be a vector of non-negative integers")
            lab.setflags(write=False)
            labelings.append(lab)
        assignment = tuple(tuple(int(v) for v in views) for views in self.view_assignment)
        if assignment and len(assignment) != len(labelings):
            raise DatasetError("one view set per labeling is required")
        if any(len(views) == 0 for views in assignment):
            raise DatasetError("every planted labeling must be encoded by a view")
        object.__setattr__(self, "labelings", tuple(labelings))
        object.__setattr__(self, "view_assignment", assignment)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def _read_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing matrix file: {path}")
    if path.stat().st_size == 0:
        raise DatasetError(f"empty view file: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"non-numeric cell in {path}: {exc}") from None
    if data.size == 0:
        raise DatasetError(f"empty view file: {path}")
    return data


def _write_matrix(path: Path, rows: np.ndarray) -> None:
    # %.17g round-trips every float64 exactly
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", newline="\n", encoding="utf-8")


def read_labels(path: str | os.PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing label file: {path}")
    try:
        labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise DatasetError(f"bad label file {path}: {exc}") from None
    return labels


def write_labels(path: str | os.PathLike, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(x)}\n" for x in labels)


def load_dataset(manifest_path: str | os.PathLike) -> MultiViewDataset:
    """Load and validate the dataset described by a JSON manifest.

    Parameters
    ----------
    manifest_path : path
        Manifest with fields ``n`` and ``views`` (list of ``{name, file, d}``).
        Relative file names resolve against the manifest's directory.

    Returns
    -------
    MultiViewDataset
        Views transposed to ``d_v x n``.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"manifest is not valid JSON: {exc}") from None
    entries = manifest.get("views")
    if not entries:
        raise DatasetError("manifest lists no views")
    base = manifest_path.parent
    views, names = [], []
    for entry in entries:
        rows = _read_matrix(base / entry["file"])
        if "d" in entry and rows.shape[1] != int(entry["d"]):
            raise DatasetError(
                f"view {entry.get('name')!r}: expected {entry['d']} columns, got {rows.shape[1]}")
        views.append(rows.T)
        names.append(str(entry.get("name", f"view{len(names)}")))
    counts = [v.shape[1] for v in views]
    if len(set(counts)) != 1:
        raise DatasetError(f"sample count mismatch across views: {counts}")
    if "n" in manifest and int(manifest["n"]) != counts[0]:
        raise DatasetError(
            f"sample count mismatch: manifest says n={manifest['n']}, files have {counts[0]}")
    return MultiViewDataset(tuple(views), tuple(names))


def load_truth(manifest_path: str | os.PathLike) -> PlantedTruth | None:
    """Planted labelings referenced by the manifest's optional ``truth`` field."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    entries = manifest.get("truth")
    if not entries:
        return None
    labelings = [read_labels(manifest_path.parent / e["labels_file"]) for e in entries]
    n = manifest.get("n")
    if n is not None and any(len(lab) != int(n) for lab in labelings):
        raise DatasetError("label file length does not match n")
    return PlantedTruth(tuple(labelings), tuple(tuple(e.get("views", ())) for e in entries))


def save_dataset(ds: MultiViewDataset, directory: str | os.PathLike,
                 truth: PlantedTruth | None = None) -> Path:
    """Write ``manifest.json`` plus one CSV per view (and label files) into *directory*.

    Returns the manifest path.
    """
    for i, v in enumerate(ds.views):
        if v.shape[0] == 0:
            raise DatasetError(f"view {i} has zero rows")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    view_entries = []
    for i, (name, v) in enumerate(zip(ds.view_names, ds.views)):
        fname = f"view_{i}.csv"
        _write_matrix(directory / fname, v.T)
        view_entries.append({"name": name, "file": fname, "d": int(v.shape[0])})
    manifest = {"n": ds.n, "views": view_entries}
    if truth is not None:
        truth_entries = []
        for j, lab in enumerate(truth.labelings):
            fname = f"labels_{j}.txt"
            write_labels(directory / fname, lab)
            views = list(truth.view_assignment[j]) if truth.view_assignment else []
            truth_entries.append({"labels_file": fname, "views": views})
        manifest["truth"] = truth_entries
    path = directory / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureSpec:
    """One planted labeling: ``k`` clusters expressed in the listed views."""

    k: int
    views: tuple
    d: int
    separation: float
    sigma: float


def _cluster_means(rng: np.random.Generator, k: int, d: int, separation: float) -> np.ndarray:
    """``d x k`` means with every pairwise distance >= separation."""
    if d >= k:
        q, _ = np.linalg.qr(rng.standard_normal((d, k)))
        # orthonormal columns scaled by s/sqrt(2) sit exactly `separation` apart
        return q * (separation / np.sqrt(2.0))
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    offsets = separation * (np.arange(k) - (k - 1) / 2.0)
    return np.outer(u, offsets)


def generate_synthetic(n: int, spec: Sequence, seed: int = 0):
    """Sample a multi-view dataset with planted alternative clusterings.

    Each entry of *spec* is a :class:`StructureSpec` (or a tuple
    ``(k, views, d, separation, sigma)``). Labeling ``j`` assigns samples
    evenly to its ``k`` clusters in random order; every view listed for it
    receives the cluster mean of each sample plus isotropic Gaussian noise
    with standard deviation ``sigma``. A view shared by several labelings
    sums their contributions.

    Returns
    -------
    (MultiViewDataset, PlantedTruth)
    """
    specs = [s if isinstance(s, StructureSpec) else StructureSpec(*s) for s in spec]
    if not specs:
        raise DatasetError("structure spec is empty")
    dims: dict[int, int] = {}
    for j, s in enumerate(specs):
        if s.k < 2:
            raise DatasetError(f"structure {j}: need k >= 2, got {s.k}")
        if len(s.views) == 0:
            raise DatasetError(f"structure {j}: empty view list")
        if s.d < 1:
            raise DatasetError(f"structure {j}: d must be >= 1")
        if not s.separation > 0:
            raise DatasetError(f"structure {j}: separation must be > 0")
        if s.sigma < 0:
            raise DatasetError(f"structure {j}: sigma must be >= 0")
        for v in s.views:
            if v < 0:
                raise DatasetError(f"structure {j}: negative view index {v}")
            if dims.setdefault(int(v), s.d) != s.d:
                raise DatasetError(f"view {v} is given conflicting dimensions")
    V = max(dims) + 1
    if sorted(dims) != list(range(V)):
        raise DatasetError("view indices must cover 0..V-1 without gaps")
    if n < sum(s.k for s in specs):
        raise DatasetError("n must be at least the total number of clusters")

    rng = np.random.default_rng(seed)
    views = [np.zeros((dims[v], n)) for v in range(V)]
    labelings = []
    for s in specs:
        labels = rng.permutation(np.arange(n) % s.k)
        labelings.append(labels)
        for v in s.views:
            means = _cluster_means(rng, s.k, s.d, s.separation)
            noise = rng.standard_normal((s.d, n)) * s.sigma
            views[v] += means[:, labels] + noise
    truth = PlantedTruth(tuple(labelings), tuple(tuple(s.views) for s in specs))
    return MultiViewDataset(tuple(views)), truth


def add_noise_view(ds: MultiViewDataset, d: int, seed: int = 0,
                   name: str = "noise") -> MultiViewDataset:
    """Append an i.i.d. standard-normal ``d x n`` view."""
    if d < 1:
        raise DatasetError("noise view dimension must be >= 1")
    noise = np.random.default_rng(seed).standard_normal((d, ds.n))
    return MultiViewDataset(ds.views + (noise,), ds.view_names + (name,))


def zscore(ds: MultiViewDataset) -> MultiViewDataset:
    """Standardize every feature (row) to zero mean and unit variance.

    Constant features are centred only.
    """
    out = []
    for v in ds.views:
        mu = v.mean(axis=1, keepdims=True)
        sd = v.std(axis=1, keepdims=True)
        sd[sd == 0] = 1.0
        out.append((v - mu) / sd)
    return MultiViewDataset(tuple(out), ds.view_names)
