"""Dense symmetric kernels: pseudo-inverse, parallel sum and a generalized
eigensolver for pencils of positive semidefinite matrices."""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

PINV_RTOL = 1e-12
INF_TOL = 1e-12


def _check_symmetric(M, name="matrix", tol=1e-10):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = max(np.abs(M).max(initial=0.0), 1e-300)
    if np.abs(M - M.T).max(initial=0.0) > tol * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


def sym(M):
    return 0.5 * (M + M.T)


def pseudo_inverse(M, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix.

    Eigenvalues below ``rel_tol * lambda_max`` are treated as zero.
    """
    M = _check_symmetric(M)
    w, Q = np.linalg.eigh(M)
    cut = rel_tol * max(np.abs(w).max(initial=0.0), 0.0)
    keep = w > cut
    if not np.any(keep):
        return np.zeros_like(M)
    Qk = Q[:, keep]
    return sym((Qk / w[keep]) @ Qk.T)


def parallel_sum(A, B, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """``A:B = B (A+B)^+ A``, symmetrized.

    Evaluated as ``(A+B)^{1/2} (I - K^2) (A+B)^{1/2} / 4`` with
    ``K = (A+B)^{+1/2} (A - B) (A+B)^{+1/2}``, whose eigenvalues are
    clipped to [-1, 1].  The form is symmetric in ``A`` and ``B``, PSD,
    and below both arguments up to roundoff even when ``A + B`` is nearly
    singular.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"size mismatch: {A.shape} vs {B.shape}")
    # A:B is positively homogeneous; normalizing avoids under/overflow
    s = max(np.abs(A).max(initial=0.0), np.abs(B).max(initial=0.0))
    if s == 0.0:
        return np.zeros_like(A)
    A, B = sym(A / s), sym(B / s)
    mu, Q = np.linalg.eigh(A + B)
    keep = mu > rel_tol * max(mu.max(), 0.0)
    if not np.any(keep):
        return np.zeros_like(A)
    root = np.sqrt(mu[keep])
    Qk = Q[:, keep]
    K = sym((Qk / root).T @ (A - B) @ (Qk / root))
    d, U = np.linalg.eigh(K)
    d = np.clip(d, -1.0, 1.0)
    W = (Qk * root) @ U
    return s * sym((W * (0.25 * (1.0 - d * d))) @ W.T)


def parallel_sum_fold(mats, rel_tol: float = PINV_RTOL) -> np.ndarray:
    mats = list(mats)
    if len(mats) < 2:
        raise ValueError("parallel_sum_fold needs at least two matrices")
    return reduce(lambda X, Y: parallel_sum(X, Y, rel_tol), mats)


@dataclass
class EigenDecomposition:
    """Pairs of ``A v = lam B v`` sorted descending, infinite values first.

    ``vectors[:, k]`` is A-normalized.  Directions in the joint null space
    of A and B (``n_null``) and directions with ``A v = 0`` but ``B v != 0``
    (``n_zero``, eigenvalue 0) carry no A-energy and are not returned.
    """

    values: np.ndarray
    vectors: np.ndarray
    n_null: int = 0
    n_zero: int = 0

    def __len__(self):
        return len(self.values)

    @property
    def n_infinite(self) -> int:
        return int(np.sum(np.isinf(self.values)))

    @property
    def finite_values(self) -> np.ndarray:
        return self.values[np.isfinite(self.values)]


def generalized_eig(A, B, rel_tol: float = PINV_RTOL, inf_tol: float = INF_TOL) -> EigenDecomposition:
    """Solve ``A v = lam B v`` for symmetric PSD ``A``, ``B``.

    The pencil is restricted to the complement of ``null(A) ∩ null(B)`` =
    ``null(A+B)`` and normalized so that ``A + B`` becomes the identity
    there.  On that subspace ``A v = theta (A+B) v`` with ``theta`` in
    [0, 1], hence ``lam = theta / (1 - theta)``; ``theta = 1`` gives
    ``lam = inf``.
    """
    A = _check_symmetric(A, "A")
    B = _check_symmetric(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"size mismatch: {A.shape} vs {B.shape}")
    n = A.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    mu, Q = np.linalg.eigh(A + B)
    active = mu > rel_tol * max(mu.max(), 0.0)
    n_null = int(n - active.sum())
    if not np.any(active):
        return EigenDecomposition(np.zeros(0), np.zeros((n, 0)), n_null, 0)
    Y = Q[:, active] / np.sqrt(mu[active])
    theta, U = np.linalg.eigh(sym(Y.T @ A @ Y))
    theta = np.clip(theta, 0.0, 1.0)
    order = np.argsort(-theta, kind="stable")
    theta, U = theta[order], U[:, order]
    positive = theta > inf_tol
    n_zero = int((~positive).sum())
    theta, U = theta[positive], U[:, positive]
    gap = 1.0 - theta
    with np.errstate(divide="ignore"):
        lam = np.where(gap > inf_tol, theta / np.maximum(gap, inf_tol), np.inf)
    V = (Y @ U) / np.sqrt(theta)
    return EigenDecomposition(lam, V, n_null, n_zero)


def psd_min_eig(M) -> float:
    """Smallest eigenvalue of the symmetric part of ``M`` (form-inequality checks)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(sym(M))[0])
