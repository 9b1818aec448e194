import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptdd.linalg import (generalized_eig, parallel_sum, parallel_sum_fold, pseudo_inverse,
                            psd_min_eig)

from conftest import random_psd


def test_pinv_diag():
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def test_pinv_spd_is_inverse(rng):
    M = random_psd(rng, 5) + np.eye(5)
    assert np.abs(M @ pseudo_inverse(M) - np.eye(5)).max() <= 1e-10


def test_pinv_penrose_rank2(rng):
    M = random_psd(rng, 4, rank=2)
    P = pseudo_inverse(M)
    assert np.abs(P @ M @ P - P).max() <= 1e-10 * np.abs(P).max()
    assert np.abs(M @ P @ M - M).max() <= 1e-10 * np.abs(M).max()


def test_pinv_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        pseudo_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_parallel_sum_examples():
    np.testing.assert_allclose(parallel_sum(2 * np.eye(3), 2 * np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(parallel_sum(np.diag([1.0, 0]), np.diag([0, 1.0])), 0, atol=1e-14)
    with pytest.raises(ValueError):
        parallel_sum(np.eye(2), np.eye(3))


def test_parallel_sum_spd_harmonic(rng):
    A, B = random_psd(rng, 5) + np.eye(5), random_psd(rng, 5) + np.eye(5)
    oracle = np.linalg.inv(np.linalg.inv(A) + np.linalg.inv(B))
    assert np.abs(parallel_sum(A, B) - oracle).max() <= 1e-10 * np.abs(oracle).max()


def test_fold_examples(rng):
    np.testing.assert_allclose(parallel_sum_fold([3 * np.eye(2)] * 3), np.eye(2), atol=1e-14)
    mats = [random_psd(rng, 4) + 0.1 * np.eye(4) for _ in range(3)]
    oracle = np.linalg.inv(sum(np.linalg.inv(M) for M in mats))
    a, b = parallel_sum_fold(mats), parallel_sum_fold(mats[::-1])
    assert np.abs(a - b).max() <= 1e-9 * np.abs(oracle).max()
    assert np.abs(a - oracle).max() <= 1e-9 * np.abs(oracle).max()
    for M in mats:
        assert psd_min_eig(M - a) >= -1e-10 * np.abs(M).max()
    with pytest.raises(ValueError):
        parallel_sum_fold([np.eye(2)])


psd_factor = arrays(np.float64, (5, 3), elements=st.floats(-10, 10, allow_subnormal=False))


@settings(max_examples=300, deadline=None)
@given(psd_factor, psd_factor)
def test_parallel_sum_properties(X, Y):
    A, B = X @ X.T, Y @ Y.T
    # keep away from the pseudo-inverse cutoff, where A:B depends on the threshold
    mu = np.linalg.eigvalsh(A + B)
    top = max(mu.max(), 1e-300)
    assume(not np.any((mu > 1e-14 * top) & (mu < 1e-8 * top)))
    scale = max(np.linalg.norm(A, 2) + np.linalg.norm(B, 2), 1.0)
    C = parallel_sum(A, B)
    assert np.abs(C - parallel_sum(B, A)).max() <= 1e-10 * scale
    assert psd_min_eig(A - C) >= -1e-10 * scale
    assert psd_min_eig(B - C) >= -1e-10 * scale
    assert psd_min_eig(C) >= -1e-10 * scale


def test_gevp_examples():
    e = generalized_eig(np.diag([2.0, 3.0]), np.eye(2))
    np.testing.assert_allclose(e.values, [3.0, 2.0])
    e = generalized_eig(np.eye(2), np.diag([1.0, 0.0]))
    assert np.isinf(e.values[0]) and e.values[1] == pytest.approx(1.0)
    assert e.n_infinite == 1


def test_gevp_joint_null_is_dropped():
    A = np.diag([1.0, 0.0, 0.0])
    B = np.diag([1.0, 0.0, 2.0])
    e = generalized_eig(A, B)
    assert e.n_null == 1 and e.n_zero == 1
    assert len(e) + e.n_null + e.n_zero == 3
    np.testing.assert_allclose(e.values, [1.0])


def test_gevp_degenerate_class():
    e = generalized_eig(np.zeros((3, 3)), np.zeros((3, 3)))
    assert len(e) == 0 and e.n_null == 3


def test_gevp_random_pencil(rng):
    A, B = random_psd(rng, 6, 4), random_psd(rng, 6, 5)
    e = generalized_eig(A, B)
    V = e.vectors
    np.testing.assert_allclose(V.T @ A @ V, np.eye(V.shape[1]), atol=1e-10)
    for lam, v in zip(e.values, V.T):
        if np.isfinite(lam):
            assert np.linalg.norm(A @ v - lam * B @ v) <= 1e-8 * np.linalg.norm(A) * max(lam, 1)
        else:
            assert np.linalg.norm(B @ v) <= 1e-8 * np.linalg.norm(B)
    # oracle: finite eigenvalues of the definite pencil restricted to range(A + B)
    w, Q = np.linalg.eigh(A + B)
    Qa = Q[:, w > 1e-12 * w.max()]
    th = np.linalg.eigvals(np.linalg.solve(Qa.T @ (A + B) @ Qa, Qa.T @ A @ Qa)).real
    th = np.sort(th[(th > 1e-12) & (th < 1 - 1e-12)])[::-1]
    np.testing.assert_allclose(np.sort(e.finite_values)[::-1], th / (1 - th), rtol=1e-8)
