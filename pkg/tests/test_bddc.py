import numpy as np
import pytest
import scipy.sparse.linalg as spla

from adaptdd.bddc import (BDDCPreconditioner, InterfaceOperator, PartiallyCoupledOperator,
                          SingularCoarseError, assemble_rhs, averaging_energy_ratios)
from adaptdd.experiments import ExperimentConfig, bound_constant, select_constraints
from adaptdd.krylov import explicit_spectrum, pcg
from adaptdd.mesh import assemble_global
from adaptdd.scaling import build_scaling

from conftest import cached_substructures


def _operators(sub, method, kind):
    cfg = ExperimentConfig(sub.mesh.dim, sub.mesh.N, sub.mesh.m, method)
    scaling = build_scaling(sub.dec, kind, sub.principal)
    prim = select_constraints(sub, cfg, scaling)
    op = PartiallyCoupledOperator(sub.dec, sub.schur, prim.bases)
    return op, BDDCPreconditioner(op, scaling), InterfaceOperator(op), prim


@pytest.fixture(scope="module")
def sub2():
    return cached_substructures(2, 2, 4, "random:1")


def test_energy_identity(sub2, rng):
    op, *_ = _operators(sub2, 3, "deluxe")
    S = op.dense()
    for _ in range(5):
        w = rng.standard_normal(op.n)
        assert op.energy(w) == pytest.approx(w @ S @ w, rel=1e-12)


def test_solve_inverts_apply(sub2, rng):
    op, *_ = _operators(sub2, 2, "multiplicity")
    f = rng.standard_normal(op.n)
    np.testing.assert_allclose(op.apply(op.solve(f)), f, atol=1e-9 * np.abs(f).max())


def test_interface_operator_matches_assembled(sub2, rng):
    op, prec, iface, _ = _operators(sub2, 0, "multiplicity")
    u, v = rng.standard_normal(iface.n), rng.standard_normal(iface.n)
    assert iface(u) @ v == pytest.approx(iface(v) @ u, rel=1e-12)
    # R~^T S~ R~ = sum R_i^T S_i R_i
    lhs = prec.extend_tilde(op.apply(prec.restrict_tilde(u)))
    np.testing.assert_allclose(lhs, iface(u), atol=1e-10 * np.abs(lhs).max())


def test_solution_matches_direct_solve(sub2):
    op, prec, iface, _ = _operators(sub2, 3, "deluxe")
    g = iface.transform_rhs(assemble_rhs(sub2.dec, sub2.schur))
    x, rep = pcg(iface, prec, g)
    u_hat = iface.from_transformed(x)
    mesh = sub2.mesh
    dofs, A, f = assemble_global(mesh, sub2.coeff)
    u = np.zeros(mesh.num_nodes)
    u[dofs] = spla.spsolve(A.tocsc(), f)
    nodes = np.concatenate([c.nodes for c in sub2.dec.classes])
    np.testing.assert_allclose(u_hat, u[nodes], atol=1e-8 * np.abs(u).max())


def test_method0_spectrum_constant(rng):
    sub = cached_substructures(2, 2, 4, "constant")
    op, prec, iface, _ = _operators(sub, 0, "multiplicity")
    ev = explicit_spectrum(iface, prec, iface.n)
    assert ev[0] >= 1 - 1e-10 and np.isfinite(ev[-1])


def test_all_primal_is_exact():
    sub = cached_substructures(2, 2, 4, "random:2")
    cfg = ExperimentConfig(2, 2, 4, 3, tol_face="0")
    scaling = build_scaling(sub.dec, "deluxe", sub.principal)
    prim = select_constraints(sub, cfg, scaling)
    op = PartiallyCoupledOperator(sub.dec, sub.schur, prim.bases)
    iface = InterfaceOperator(op)
    ev = explicit_spectrum(iface, BDDCPreconditioner(op, scaling), iface.n)
    np.testing.assert_allclose(ev, 1.0, atol=1e-8)


def test_averaging_energy_bound(sub2):
    op, prec, _, prim = _operators(sub2, 3, "deluxe")
    C = bound_constant(sub2.dec)
    assert np.all(averaging_energy_ratios(prec, samples=50) <= C * (1 + np.log(4)))


def test_swap_symmetry():
    """Multiplicity scaling on a symmetric coefficient: M^{-1} commutes with mirroring."""
    sub = cached_substructures(2, 2, 4, "constant")
    op, prec, iface, _ = _operators(sub, 0, "multiplicity")
    coords = sub.mesh.node_coords[np.concatenate([c.nodes for c in sub.dec.classes])]
    n = sub.mesh.n
    mirror = {tuple(x): k for k, x in enumerate(coords)}
    perm = np.array([mirror[(n - x, y)] for x, y in coords])
    r = np.random.default_rng(3).standard_normal(iface.n)
    np.testing.assert_allclose(prec(r[perm]), prec(r)[perm], atol=1e-10)


def test_singular_coarse_detected():
    sub = cached_substructures(2, 2, 4, "constant")
    S = [so.S.copy() for so in sub.schur]
    S[0][:] = 0.0
    with pytest.raises(SingularCoarseError):
        PartiallyCoupledOperator(sub.dec, S)
