"""Generalized eigenvalue problems on faces and edges, primal selection and
change of basis."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import EigenDecomposition, generalized_eig, parallel_sum_fold, psd_min_eig, sym

FORM_TOL = 1e-10


@dataclass
class EigSelection:
    """Eigenpairs of one class problem and the pairs chosen as primal."""

    class_id: int
    left: np.ndarray
    right: np.ndarray
    eig: EigenDecomposition
    tol: float = np.inf
    k: int = 0

    @property
    def values(self) -> np.ndarray:
        return self.eig.values

    @property
    def vectors(self) -> np.ndarray:
        return self.eig.vectors

    @property
    def primal_vectors(self) -> np.ndarray:
        return self.eig.vectors[:, : self.k]

    def constraints(self) -> np.ndarray:
        """Rows ``(A_C v_n)^T`` of the selected constraint functionals."""
        return (self.left @ self.primal_vectors).T

    def coarse_component(self, w: np.ndarray) -> np.ndarray:
        """``sum_n <A_C w, v_n> v_n`` over selected ``v_n``."""
        V = self.primal_vectors
        return V @ (V.T @ (self.left @ w))


def select_primal(sel: EigSelection, tol: float) -> EigSelection:
    """Keep every pair with ``lam >= tol``; infinite pairs are always kept."""
    vals = sel.eig.values
    k = int(np.sum(vals >= tol)) if np.isfinite(tol) else int(np.sum(np.isinf(vals)))
    sel.tol, sel.k = tol, k
    return sel


def check_partition_of_unity(D: dict, tol: float = 1e-8):
    total = sum(D.values())
    n = total.shape[0]
    if np.abs(total - np.eye(n)).max(initial=0.0) > tol * max(1.0, np.abs(total).max(initial=0.0)):
        raise ValueError("scaling matrices do not sum to the identity")


def left_matrix(S: dict, D: dict) -> np.ndarray:
    """``sum_m sum_{l != m} D_l^T S_m D_l`` (reduces to the face form for two sharers)."""
    subs = list(S)
    out = np.zeros_like(S[subs[0]])
    for m in subs:
        for l in subs:
            if l != m:
                out += D[l].T @ S[m] @ D[l]
    return sym(out)


def local_left_matrix(S: dict, D: dict, m) -> np.ndarray:
    """``A_C^(m) = sum_{l != m} (D_l^T S_m D_l + D_m^T S_l D_m)``."""
    out = np.zeros_like(S[m])
    for l in S:
        if l != m:
            out += D[l].T @ S[m] @ D[l] + D[m].T @ S[l] @ D[m]
    return sym(out)


def class_gevp(class_id: int, S: dict, St: dict, D: dict, tol: float | None = None,
               check_forms: bool = True) -> EigSelection:
    """``A_C v = lam (S~^(1) : ... : S~^(q)) v`` for a class shared by ``q`` subdomains.

    ``S``, ``St`` and ``D`` map each sharing subdomain to its principal
    block, condensed block and scaling matrix.
    """
    if set(S) != set(St) or set(S) != set(D):
        raise ValueError("blocks and scalings must cover the same subdomains")
    if len(S) < 2:
        raise ValueError("a class problem needs at least two sharing subdomains")
    check_partition_of_unity(D)
    A = left_matrix(S, D)
    R = parallel_sum_fold([St[s] for s in St])
    if check_forms and len(S) > 2:
        scale = max(np.abs(A).max(), 1e-300)
        for m in S:
            if psd_min_eig(A - local_left_matrix(S, D, m)) < -FORM_TOL * scale:
                raise AssertionError(f"class {class_id}: A_C^({m}) <= A_C violated")
            rs = max(np.abs(St[m]).max(), 1e-300)
            if psd_min_eig(St[m] - R) < -FORM_TOL * rs:
                raise AssertionError(f"class {class_id}: parallel sum exceeds S~^({m})")
    sel = EigSelection(class_id, A, R, generalized_eig(A, R))
    if tol is not None:
        select_primal(sel, tol)
    return sel


def face_gevp(S_i, S_j, St_i, St_j, D_i, D_j, tol=None, class_id=-1) -> EigSelection:
    return class_gevp(class_id, {0: S_i, 1: S_j}, {0: St_i, 1: St_j}, {0: D_i, 1: D_j}, tol)


def edge_gevp(class_id: int, S: dict, St: dict, D: dict, tol=None) -> EigSelection:
    if len(S) < 3:
        raise ValueError(f"edge {class_id} has {len(S)} sharing subdomains; expected at least 3")
    return class_gevp(class_id, S, St, D, tol)


@dataclass
class TwoTypeSelection:
    type1: EigSelection
    type1_reverse: EigSelection
    type2: EigSelection

    @property
    def n_type1(self) -> int:
        return self.type1.k + self.type1_reverse.k

    @property
    def n_type2(self) -> int:
        return self.type2.k

    def constraints(self) -> np.ndarray:
        return np.vstack([self.type1.constraints(), self.type1_reverse.constraints(),
                          self.type2.constraints()])


def two_type_face_gevps(St_i, St_j, S_i, S_j, tol: float, class_id=-1) -> TwoTypeSelection:
    """The two face problems of the two-type selection.

    Type 1, ``S~_i v = lam S~_j v``, keeps ``lam >= tol`` and ``lam <= 1/tol``
    (the latter found as ``lam >= tol`` of the reversed pencil).  Type 2,
    ``(S_i + S_j) v = lam (S~_i + S~_j) v``, keeps ``lam >= tol``.
    """
    t1 = select_primal(EigSelection(class_id, sym(St_i), sym(St_j), generalized_eig(St_i, St_j)), tol)
    t1r = select_primal(EigSelection(class_id, sym(St_j), sym(St_i), generalized_eig(St_j, St_i)), tol)
    L, R = sym(S_i + S_j), sym(St_i + St_j)
    t2 = select_primal(EigSelection(class_id, L, R, generalized_eig(L, R)), tol)
    return TwoTypeSelection(t1, t1r, t2)


@dataclass
class ChangeOfBasis:
    """Square ``P`` whose first ``k`` columns span the primal directions.

    Transformed coordinates are ``P^{-1} w``; their first ``k`` entries are
    the values of the constraint functionals.
    """

    P: np.ndarray
    k: int
    Pinv: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.Pinv is None:
            self.Pinv = np.linalg.inv(self.P)

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def transform(self, S: np.ndarray) -> np.ndarray:
        return sym(self.P.T @ S @ self.P)

    @classmethod
    def identity(cls, n: int) -> "ChangeOfBasis":
        return cls(np.eye(n), 0, np.eye(n))


def _null_space_rows(C: np.ndarray, n: int) -> np.ndarray:
    if C.shape[0] == 0:
        return np.eye(n)
    return sla.null_space(C)


def change_of_basis(sel: EigSelection) -> ChangeOfBasis:
    """``P = [v_1 ... v_k v_{k+1} ... v_N]`` from the class eigenbasis.

    If the pencil lost directions (joint null space or zero eigenvalues),
    the basis is completed by an orthonormal basis of the subspace
    A-orthogonal to all returned eigenvectors.
    """
    V = sel.vectors
    n = sel.left.shape[0]
    if V.shape[1] < n:
        Z = _null_space_rows((sel.left @ V).T, n)
        V = np.hstack([V, Z])
    if V.shape[1] != n or np.linalg.matrix_rank(V) < n:
        warnings.warn(f"class {sel.class_id}: rank-deficient eigenbasis, completing from constraints",
                      RuntimeWarning)
        return basis_from_constraints(sel.constraints())
    return ChangeOfBasis(V, sel.k)


def basis_from_constraints(C: np.ndarray, rank_tol: float = 1e-10) -> ChangeOfBasis:
    """Basis whose first coordinates equal an orthonormalized version of ``C w``.

    Dependent rows of ``C`` are dropped.  With ``C`` of full row rank ``k``,
    ``P = [C^+ Z]`` with ``Z`` spanning ``null(C)``, so ``C P = [I 0]``.
    """
    n = C.shape[1]
    if C.shape[0] == 0:
        return ChangeOfBasis.identity(n)
    U, s, Vt = np.linalg.svd(C, full_matrices=True)
    r = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    Q = Vt[:r]  # orthonormal rows spanning the constraint functionals
    Z = Vt[r:].T
    P = np.hstack([Q.T, Z])
    return ChangeOfBasis(P, r, P.T.copy())


def local_energy_terms(sel: EigSelection, S_sub: np.ndarray, idx, w: np.ndarray,
                       form: np.ndarray | None = None) -> tuple[float, float]:
    """``(<form z, z>, tol <S w, w>)`` with ``z = w_C - sum_n <A_C w_C, v_n> v_n``.

    ``w`` is a vector on one subdomain's interface, ``idx`` locates the
    class inside it and ``S_sub`` is that subdomain's Schur complement.
    ``form`` defaults to the class matrix ``A_C``; pass ``A_C^(m)`` for
    the per-subdomain edge estimate. The first term never exceeds the
    second when the right-hand form is dominated by ``S_sub``.
    """
    form = sel.left if form is None else form
    wc = w[idx]
    z = wc - sel.coarse_component(wc)
    return float(z @ form @ z), float(sel.tol * (w @ S_sub @ w))
