import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from dmclusts.clustering import kmeans
from dmclusts.dataset import (DatasetError, MultiViewDataset, PlantedTruth, add_noise_view,
                              generate_synthetic, load_dataset, load_truth, save_dataset,
                              zscore)
from dmclusts.metrics import nmi


def _write_manifest(tmp_path, rows_per_view):
    views = []
    for i, rows in enumerate(rows_per_view):
        np.savetxt(tmp_path / f"v{i}.csv", np.ones((rows, 2)), delimiter=",")
        views.append({"name": f"v{i}", "file": f"v{i}.csv", "d": 2})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"n": rows_per_view[0], "views": views}))
    return path


def test_load_two_views_three_samples(tmp_path):
    ds = load_dataset(_write_manifest(tmp_path, [3, 3]))
    assert (ds.n, ds.V, ds.dims) == (3, 2, [2, 2])


def test_sample_count_mismatch(tmp_path):
    with pytest.raises(DatasetError, match="sample count mismatch"):
        load_dataset(_write_manifest(tmp_path, [3, 4]))


def test_non_numeric_cell(tmp_path):
    path = _write_manifest(tmp_path, [3, 3])
    (tmp_path / "v1.csv").write_text("1,2\n3,abc\n5,6\n")
    with pytest.raises(DatasetError, match="non-numeric"):
        load_dataset(path)


def test_missing_file(tmp_path):
    path = _write_manifest(tmp_path, [3, 3])
    (tmp_path / "v0.csv").unlink()
    with pytest.raises((DatasetError, FileNotFoundError)):
        load_dataset(path)


def test_empty_view_file(tmp_path):
    path = _write_manifest(tmp_path, [3, 3])
    (tmp_path / "v0.csv").write_text("")
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_invariants():
    with pytest.raises(DatasetError):
        MultiViewDataset(())
    with pytest.raises(DatasetError):
        MultiViewDataset((np.ones((2, 1)),))
    with pytest.raises(DatasetError):
        MultiViewDataset((np.array([[1.0, np.nan]]),))
    with pytest.raises(DatasetError):
        MultiViewDataset((np.ones((0, 3)),))
    ds = MultiViewDataset((np.ones((2, 3)),))
    with pytest.raises(ValueError):
        ds.views[0][0, 0] = 5.0


def test_round_trip_with_truth(tmp_path, rng):
    ds = MultiViewDataset((rng.standard_normal((3, 7)) * 1e-7, rng.standard_normal((5, 7)) * 1e9))
    truth = PlantedTruth((rng.integers(0, 3, 7),), ((0, 1),))
    path = save_dataset(ds, tmp_path, truth)
    assert load_dataset(path) == ds
    back = load_truth(path)
    np.testing.assert_array_equal(back.labelings[0], truth.labelings[0])
    assert back.view_assignment == ((0, 1),)


def test_single_view_manifest(tmp_path):
    path = save_dataset(MultiViewDataset((np.arange(6.0).reshape(2, 3),)), tmp_path)
    manifest = json.loads(path.read_text())
    assert [v["file"] for v in manifest["views"]] == ["view_0.csv"]
    # one row per sample on disk
    assert len((tmp_path / "view_0.csv").read_text().splitlines()) == 3


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 6)),
                  elements=st.floats(-1e12, 1e12, allow_nan=False)))
def test_round_trip_property(tmp_path_factory, X):
    d = tmp_path_factory.mktemp("rt")
    ds = MultiViewDataset((X, X[::-1] * 0.5))
    assert load_dataset(save_dataset(ds, d)) == ds


SPEC = [(3, (0, 1), 10, 10.0, 0.0), (3, (2, 3), 10, 10.0, 0.0)]


def test_zero_noise_groups_recover_their_labeling():
    ds, truth = generate_synthetic(120, SPEC, seed=3)
    for j, views in enumerate(truth.view_assignment):
        X = np.vstack([ds.views[v] for v in views])
        assert nmi(kmeans(X, 3, seed=0), truth.labelings[j]) == pytest.approx(1.0)


def test_noisy_groups_recover_their_labeling():
    spec = [(3, (0, 1), 30, 10.0, 0.5), (3, (2, 3), 30, 10.0, 0.5)]
    ds, truth = generate_synthetic(500, spec, seed=1)
    for j, views in enumerate(truth.view_assignment):
        X = np.vstack([ds.views[v] for v in views])
        assert nmi(kmeans(X, 3, seed=0), truth.labelings[j]) >= 0.9


def test_cluster_means_are_separated():
    ds, truth = generate_synthetic(90, SPEC, seed=4)
    lab = truth.labelings[0]
    means = np.stack([ds.views[0][:, lab == c].mean(1) for c in range(3)])
    dist = np.linalg.norm(means[:, None] - means[None], axis=2)
    assert dist[np.triu_indices(3, 1)].min() >= 10.0 - 1e-9


def test_generator_is_deterministic_and_uses_all_labels():
    a, ta = generate_synthetic(60, SPEC, seed=9)
    b, tb = generate_synthetic(60, SPEC, seed=9)
    assert a == b
    for la, lb in zip(ta.labelings, tb.labelings):
        np.testing.assert_array_equal(la, lb)
        assert np.bincount(la).min() > 0
    c, _ = generate_synthetic(60, SPEC, seed=10)
    assert not a == c


@pytest.mark.parametrize("spec", [
    [(1, (0,), 3, 1.0, 0.1)],
    [(3, (), 3, 1.0, 0.1)],
    [(3, (0,), 3, 0.0, 0.1)],
    [(3, (0,), 3, 1.0, -1.0)],
    [(3, (1,), 3, 1.0, 0.1)],
])
def test_invalid_spec(spec):
    with pytest.raises(DatasetError):
        generate_synthetic(30, spec, seed=0)


def test_noise_view():
    ds = MultiViewDataset((np.ones((2, 200)), np.zeros((3, 200))))
    out = add_noise_view(ds, 60, seed=5)
    assert out.V == 3
    for a, b in zip(ds.views, out.views[:2]):
        np.testing.assert_array_equal(a, b)
    noise = out.views[2]
    assert abs(noise.mean()) < 0.05
    assert abs(noise.var() - 1.0) < 0.05
    np.testing.assert_array_equal(add_noise_view(ds, 60, seed=5).views[2], noise)


def test_zscore_rows():
    ds = MultiViewDataset((np.array([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]]),))
    z = zscore(ds).views[0]
    np.testing.assert_allclose(z[0], [-1.224744871391589, 0.0, 1.224744871391589])
    np.testing.assert_array_equal(z[1], 0.0)
