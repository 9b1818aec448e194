"""FETI-DP with vertex primal unknowns and a projector enforcing adaptive
constraints on the multipliers."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .adaptive import EigSelection
from .bddc import PartiallyCoupledOperator
from .decomposition import JumpOperator, build_scaled_jump

GRAM_COND_WARN = 1e12


class DualSystem:
    """``F = B S~^{-1} B^T`` on the multiplier space; ``S~`` couples vertices only."""

    def __init__(self, op: PartiallyCoupledOperator, B: JumpOperator, scalings):
        if any(op.bases[c.id].k for c in op.dec.classes if c.kind != "vertex"):
            raise ValueError("the dual system expects an operator with vertex primal dofs only")
        self.op = op
        self.B = B
        self.BD_blocks = build_scaled_jump(B, scalings)

    @property
    def n(self) -> int:
        return self.B.n_rows

    def jump(self, w) -> np.ndarray:
        """``B w~``."""
        return sum(Bi @ self.op.local(w, i) for i, Bi in enumerate(self.B.blocks))

    def jump_transpose(self, lam) -> np.ndarray:
        return self.op.gather([Bi.T @ lam for Bi in self.B.blocks])

    def scaled_jump(self, w) -> np.ndarray:
        return sum(Bi @ self.op.local(w, i) for i, Bi in enumerate(self.BD_blocks))

    def scaled_jump_transpose(self, lam) -> np.ndarray:
        return self.op.gather([Bi.T @ lam for Bi in self.BD_blocks])

    def apply(self, lam) -> np.ndarray:
        return self.jump(self.op.solve(self.jump_transpose(lam)))

    __call__ = apply

    def precondition(self, lam) -> np.ndarray:
        """Dirichlet preconditioner ``B_D S~ B_D^T``."""
        return self.scaled_jump(self.op.apply(self.scaled_jump_transpose(lam)))

    def rhs(self, g_tilde) -> np.ndarray:
        """``d = B S~^{-1} g~``."""
        return self.jump(self.op.solve(g_tilde))

    def primal_solution(self, lam, g_tilde) -> np.ndarray:
        """``w~ = S~^{-1}(g~ - B^T lam)``."""
        return self.op.solve(g_tilde - self.jump_transpose(lam))


def build_U(B: JumpOperator, selections: dict[int, EigSelection]) -> np.ndarray:
    """Columns ``A_C v_n`` placed on the rows of each sharing pair of class ``C``."""
    cols = []
    for (cid, l, m), rows in B.pair_rows.items():
        sel = selections.get(cid)
        if sel is None or sel.k == 0:
            continue
        for g in sel.constraints():
            u = np.zeros(B.n_rows)
            u[rows] = g
            cols.append(u)
    if not cols:
        return np.zeros((B.n_rows, 0))
    return np.column_stack(cols)


@dataclass
class Projector:
    """``P = U (U^T F U)^{-1} U^T F``."""

    U: np.ndarray
    F: object
    FU: np.ndarray = field(init=False, repr=False)
    gram_cond: float = field(init=False, default=1.0)
    pruned: int = field(init=False, default=0)

    def __post_init__(self):
        U = self.U
        FU = np.column_stack([self.F(U[:, j]) for j in range(U.shape[1])]) if U.shape[1] else \
            np.zeros_like(U)
        G = 0.5 * (U.T @ FU + FU.T @ U)
        if U.shape[1]:
            # prune columns dependent in the F inner product
            Q, R, piv = sla.qr(G, pivoting=True)
            d = np.abs(np.diag(R))
            keep = np.sort(piv[d > 1e-13 * d.max()]) if d.size and d.max() > 0 else np.zeros(0, int)
            if len(keep) < U.shape[1]:
                self.pruned = U.shape[1] - len(keep)
                warnings.warn(f"projector: pruned {self.pruned} F-dependent columns of U",
                              RuntimeWarning)
                U, FU, G = U[:, keep], FU[:, keep], G[np.ix_(keep, keep)]
            ev = np.linalg.eigvalsh(G)
            self.gram_cond = float(ev[-1] / ev[0]) if ev.size and ev[0] > 0 else np.inf
            if self.gram_cond > GRAM_COND_WARN:
                warnings.warn(f"projector: Gram matrix condition number {self.gram_cond:.2e}",
                              RuntimeWarning)
            self._chol = sla.cho_factor(G)
        self.U, self.FU = U, FU

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def _solve(self, b):
        return sla.cho_solve(self._chol, b)

    def apply(self, x) -> np.ndarray:
        if not self.rank:
            return np.zeros_like(x)
        return self.U @ self._solve(self.FU.T @ x)

    def apply_transpose(self, x) -> np.ndarray:
        if not self.rank:
            return np.zeros_like(x)
        return self.FU @ self._solve(self.U.T @ x)

    def complement(self, x) -> np.ndarray:
        """``(I - P) x``."""
        return x - self.apply(x)

    def complement_transpose(self, x) -> np.ndarray:
        return x - self.apply_transpose(x)

    def initial_iterate(self, d) -> np.ndarray:
        """``U (U^T F U)^{-1} U^T d``; its residual is orthogonal to ``U``."""
        if not self.rank:
            return np.zeros_like(d)
        return self.U @ self._solve(self.U.T @ d)


class ProjectedPreconditioner:
    """``M_PP^{-1} = (I - P) M^{-1} (I - P)^T``."""

    def __init__(self, system: DualSystem, projector: Projector):
        self.system = system
        self.projector = projector

    def apply(self, r) -> np.ndarray:
        P = self.projector
        return P.complement(self.system.precondition(P.complement_transpose(r)))

    __call__ = apply
