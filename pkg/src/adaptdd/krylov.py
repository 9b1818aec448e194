"""Preconditioned conjugate gradients with Lanczos eigenvalue estimates."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class IndefiniteOperatorError(ArithmeticError):
    pass


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residuals: list[float] = field(default_factory=list)
    ritz: np.ndarray = field(default_factory=lambda: np.zeros(0))
    time: float = 0.0

    @property
    def lambda_min(self) -> float:
        return float(self.ritz[0]) if self.ritz.size else 1.0

    @property
    def lambda_max(self) -> float:
        return float(self.ritz[-1]) if self.ritz.size else 1.0

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min


def lanczos_ritz(alphas, betas) -> np.ndarray:
    """Eigenvalues of the Lanczos tridiagonal built from CG coefficients.

    ``alphas[j]`` are step lengths, ``betas[j]`` the direction-update
    ratios ``(r_{j+1}, z_{j+1}) / (r_j, z_j)``.
    """
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: max(len(a) - 1, 0)]
    if a.size == 0:
        return np.zeros(0)
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    if a.size == 1:
        return diag
    return np.sort(sla.eigvalsh_tridiagonal(diag, off))


def pcg(op_apply, precond_apply, rhs, x0=None, rtol: float = 1e-10, maxit: int = 1000,
        project=None):
    """Solve ``A x = b`` with preconditioned CG.

    Stops when ``||r_k|| / ||r_0|| <= rtol`` in the Euclidean norm.
    ``project``, if given, is applied to every new residual (used to keep
    residuals in a constrained subspace against roundoff drift).
    Returns ``(x, SolveReport)``.
    """
    t0 = time.perf_counter()
    b = np.asarray(rhs, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - op_apply(x) if x0 is not None else b.copy()
    if project is not None:
        r = project(r)
    r0 = np.linalg.norm(r)
    report = SolveReport(0, True, [1.0])
    if r0 == 0.0:
        report.time = time.perf_counter() - t0
        return x, report
    z = precond_apply(r)
    rz = float(r @ z)
    if rz <= 0:
        raise IndefiniteOperatorError(f"preconditioner not positive: (r, Mr) = {rz:.3e}")
    p = z.copy()
    alphas, betas = [], []
    converged = False
    k = 0
    while k < maxit:
        Ap = op_apply(p)
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise IndefiniteOperatorError(f"iteration {k}: (p, Ap) = {pAp:.3e}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            r = project(r)
        k += 1
        alphas.append(alpha)
        res = np.linalg.norm(r) / r0
        report.residuals.append(float(res))
        if res <= rtol:
            converged = True
            break
        z = precond_apply(r)
        rz_new = float(r @ z)
        if rz_new <= 0:
            raise IndefiniteOperatorError(f"iteration {k}: (r, Mr) = {rz_new:.3e}")
        beta = rz_new / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    report.iterations = k
    report.converged = converged
    report.ritz = lanczos_ritz(alphas, betas)
    report.time = time.perf_counter() - t0
    return x, report


def materialize(apply, dim: int) -> np.ndarray:
    """Dense matrix of a linear map, column by column."""
    out = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        out[:, j] = apply(e)
        e[j] = 0.0
    return out


def explicit_spectrum(op_apply, precond_apply, dim: int, cap: int = 3000) -> np.ndarray:
    """All eigenvalues of ``M^{-1} A``, sorted ascending.

    When ``M^{-1}`` is positive definite the symmetric form
    ``L^T A L`` (``M^{-1} = L L^T``) is used; otherwise the product's
    eigenvalues are computed directly and their real parts returned.
    """
    if dim > cap:
        raise ValueError(f"dimension {dim} exceeds the explicit-spectrum cap {cap}")
    A = materialize(op_apply, dim)
    M = materialize(precond_apply, dim)
    A, M = 0.5 * (A + A.T), 0.5 * (M + M.T)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return np.sort(np.linalg.eigvals(M @ A).real)
    return np.linalg.eigvalsh(L.T @ A @ L)
