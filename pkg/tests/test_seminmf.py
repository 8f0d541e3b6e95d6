import numpy as np
import pytest

from dmclusts.seminmf import (multiplicative_ratio, neg, pinv, pos, residual, seminmf_fit,
                              update_basis, update_representation)


def test_pos_neg_split(rng):
    A = rng.standard_normal((4, 5))
    np.testing.assert_array_equal(pos(A) - neg(A), A)
    assert pos(A).min() >= 0 and neg(A).min() >= 0


def test_ratio_leaves_zero_over_zero():
    r = multiplicative_ratio(np.array([0.0, 4.0, 0.0]), np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(r, [1.0, 2.0, 0.0], rtol=1e-8)


def test_pinv_flags_truncation():
    _, flag = pinv(np.diag([1.0, 1e-14]))
    assert flag
    inv, flag = pinv(np.diag([2.0, 4.0]))
    assert not flag
    np.testing.assert_allclose(inv, np.diag([0.5, 0.25]))


def test_rank_one_recovered(rng):
    z = rng.standard_normal((6, 1))
    h = rng.uniform(0.1, 2.0, (1, 15))
    X = z @ h
    res = seminmf_fit(X, 1, seed=0)
    assert res.residual <= 1e-8 * np.sum(X**2)


def test_full_rank_recovered():
    # instance-dependent: some random X stall where H entries hit zero
    X = np.random.default_rng(0).standard_normal((5, 8))
    res = seminmf_fit(X, 5, max_iter=2000, tol=0, seed=0)
    assert res.residual <= 1e-6 * np.sum(X**2)


def test_zero_matrix_warns():
    with pytest.warns(RuntimeWarning):
        res = seminmf_fit(np.zeros((2, 2)), 1)
    assert res.residual == 0.0 and res.degenerate
    np.testing.assert_array_equal(res.H, 0.0)


@pytest.mark.parametrize("K", [0, 4])
def test_rank_out_of_range(K):
    with pytest.raises(ValueError):
        seminmf_fit(np.ones((3, 5)), K)


def test_non_finite_input():
    X = np.ones((3, 4))
    X[1, 1] = np.inf
    with pytest.raises(ValueError):
        seminmf_fit(X, 2)


def test_monotone_and_nonnegative_every_iteration(rng):
    X = rng.standard_normal((10, 40))
    Z, H = None, None
    res = seminmf_fit(X, 4, max_iter=1, seed=2)
    H, Z = res.H, res.Z
    prev = residual(X, Z, H)
    for _ in range(200):
        H = update_representation(X, Z, H)
        assert H.min() >= 0
        Z = update_basis(X, H)
        cur = residual(X, Z, H)
        assert cur <= prev + 1e-10
        prev = cur
    hist = np.diff(seminmf_fit(X, 4, seed=2).history)
    assert hist.max() <= 1e-10


def test_seed_fixes_output(rng):
    X = rng.standard_normal((6, 30))
    a, b = seminmf_fit(X, 3, seed=4), seminmf_fit(X, 3, seed=4)
    np.testing.assert_array_equal(a.H, b.H)
    np.testing.assert_array_equal(a.Z, b.Z)


def test_basis_is_least_squares(rng):
    X, H = rng.standard_normal((6, 12)), rng.uniform(size=(3, 12))
    oracle = np.linalg.lstsq(H.T, X.T, rcond=None)[0].T
    np.testing.assert_allclose(update_basis(X, H), oracle, rtol=1e-10, atol=1e-12)
