import numpy as np
import pytest

from adaptdd.krylov import IndefiniteOperatorError, explicit_spectrum, lanczos_ritz, materialize, pcg

from conftest import random_psd


def test_identity_one_step():
    b = np.arange(1.0, 6.0)
    x, rep = pcg(lambda v: v, lambda v: v, b)
    np.testing.assert_allclose(x, b)
    assert rep.iterations == 1 and rep.converged and rep.kappa == pytest.approx(1.0)


def test_two_distinct_eigenvalues():
    A = np.diag([1.0, 10.0, 10.0, 1.0])
    x, rep = pcg(lambda v: A @ v, lambda v: v, np.ones(4))
    assert rep.iterations <= 2
    np.testing.assert_allclose(x, 1 / np.diag(A))
    assert rep.lambda_min == pytest.approx(1.0) and rep.lambda_max == pytest.approx(10.0)


def test_ritz_bracketed_by_spectrum(rng):
    A = random_psd(rng, 30) + np.eye(30)
    M = np.linalg.inv(np.diag(np.diag(A)))
    x, rep = pcg(lambda v: A @ v, lambda v: M @ v, rng.standard_normal(30), rtol=1e-12)
    ev = explicit_spectrum(lambda v: A @ v, lambda v: M @ v, 30)
    assert ev[0] - 1e-8 <= rep.lambda_min and rep.lambda_max <= ev[-1] + 1e-8
    assert np.linalg.norm(A @ x - (A @ x)) == 0
    assert rep.residuals[-1] <= 1e-12


def test_explicit_spectrum_exact_preconditioner(rng):
    A = random_psd(rng, 8) + np.eye(8)
    Ainv = np.linalg.inv(A)
    ev = explicit_spectrum(lambda v: A @ v, lambda v: Ainv @ v, 8)
    np.testing.assert_allclose(ev, 1.0, atol=1e-10)
    with pytest.raises(ValueError):
        explicit_spectrum(lambda v: v, lambda v: v, 10, cap=5)


def test_indefinite_detected():
    A = np.diag([1.0, -1.0])
    with pytest.raises(IndefiniteOperatorError):
        pcg(lambda v: A @ v, lambda v: v, np.array([0.0, 1.0]))


def test_maxit_flag():
    A = np.diag(np.arange(1.0, 51.0))
    _, rep = pcg(lambda v: A @ v, lambda v: v, np.ones(50), maxit=3)
    assert not rep.converged and rep.iterations == 3


def test_zero_rhs():
    x, rep = pcg(lambda v: v, lambda v: v, np.zeros(3))
    assert rep.iterations == 0 and np.all(x == 0)


def test_lanczos_single():
    np.testing.assert_allclose(lanczos_ritz([0.5], []), [2.0])
    assert lanczos_ritz([], []).size == 0


def test_materialize():
    M = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(materialize(lambda v: M @ v, 3), M)
