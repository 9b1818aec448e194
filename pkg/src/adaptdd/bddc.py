"""BDDC with a change of basis: the partially coupled operator, the scaled
averaging operator and the preconditioned interface operator.

All vectors live in transformed coordinates.  On every face/edge class the
coordinates are ``P_C^{-1} w_C``; the first ``k_C`` of them are primal and
shared by all subdomains of the class.  Vertex dofs are always primal.

The partially coupled space is stored as one flat vector
``[dual dofs of subdomain 0, ..., dual dofs of subdomain N-1, primal dofs]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .adaptive import ChangeOfBasis
from .decomposition import VERTEX, Decomposition
from .scaling import ScalingSet, transform_scaling


class SingularCoarseError(np.linalg.LinAlgError):
    pass


def _block_diag(mats) -> np.ndarray:
    return sla.block_diag(*mats) if mats else np.zeros((0, 0))


def class_bases(dec: Decomposition, bases: dict[int, ChangeOfBasis] | None = None):
    """Complete ``bases`` with identity (k=0) faces/edges and 1x1 primal vertices."""
    bases = dict(bases or {})
    out = {}
    for c in dec.classes:
        if c.kind == VERTEX:
            out[c.id] = ChangeOfBasis(np.eye(1), 1, np.eye(1))
        elif c.id in bases:
            if bases[c.id].size != c.size:
                raise ValueError(f"class {c.id}: basis size {bases[c.id].size} != {c.size}")
            out[c.id] = bases[c.id]
        else:
            out[c.id] = ChangeOfBasis.identity(c.size)
    return out


@dataclass
class _Local:
    T: np.ndarray
    S: np.ndarray
    primal_local: np.ndarray
    primal_glob: np.ndarray
    dual_local: np.ndarray
    dual_off: int
    chol: object = None
    K_dp: np.ndarray | None = None


class PartiallyCoupledOperator:
    """``S~ = sum_i R~_i^T S^(i)_t R~_i`` with ``S^(i)_t = T_i^T S^(i) T_i``.

    ``schur[i]`` is subdomain ``i``'s interface Schur complement ordered as
    ``dec.sub_nodes[i]``; ``bases`` maps face/edge class ids to their change
    of basis (missing classes get the identity with no primal dofs).
    """

    def __init__(self, dec: Decomposition, schur, bases=None):
        self.dec = dec
        self.bases = class_bases(dec, bases)
        k = np.array([self.bases[c.id].k for c in dec.classes], dtype=int)
        self.primal_offsets = np.concatenate([[0], np.cumsum(k)])
        self.n_primal = int(self.primal_offsets[-1])
        self.hat_primal = np.concatenate(
            [c.offset + np.arange(self.bases[c.id].k) for c in dec.classes]).astype(int)
        self.locals: list[_Local] = []
        off = 0
        for i in range(dec.num_subdomains):
            S = schur[i].S if hasattr(schur[i], "S") else np.asarray(schur[i])
            cids = dec.sub_classes[i]
            T = _block_diag([self.bases[c].P for c in cids])
            St = T.T @ S @ T
            St = 0.5 * (St + St.T)
            pl, pg = [], []
            for c in cids:
                kc = self.bases[c].k
                pl.append(dec.sub_offsets[i][c] + np.arange(kc))
                pg.append(self.primal_offsets[c] + np.arange(kc))
            pl = np.concatenate(pl).astype(int) if pl else np.zeros(0, int)
            pg = np.concatenate(pg).astype(int) if pg else np.zeros(0, int)
            dl = np.setdiff1d(np.arange(St.shape[0]), pl)
            self.locals.append(_Local(T, St, pl, pg, dl, off))
            off += len(dl)
        self.n_dual = off
        self.n = self.n_dual + self.n_primal
        self._factor()

    @property
    def primal_counts(self) -> dict[int, int]:
        return {c.id: self.bases[c.id].k for c in self.dec.classes}

    # layout helpers
    def dual_part(self, w, i):
        L = self.locals[i]
        return w[L.dual_off:L.dual_off + len(L.dual_local)]

    def primal_part(self, w):
        return w[self.n_dual:]

    def local(self, w, i) -> np.ndarray:
        """Full local transformed vector of subdomain ``i`` from ``w`` in W~."""
        L = self.locals[i]
        out = np.empty(L.S.shape[0])
        out[L.dual_local] = self.dual_part(w, i)
        out[L.primal_local] = self.primal_part(w)[L.primal_glob]
        return out

    def gather(self, local_vectors) -> np.ndarray:
        """Adjoint of ``local``: duals copied, primal entries summed."""
        out = np.zeros(self.n)
        prim = out[self.n_dual:]
        for L, v in zip(self.locals, local_vectors):
            out[L.dual_off:L.dual_off + len(L.dual_local)] = v[L.dual_local]
            np.add.at(prim, L.primal_glob, v[L.primal_local])
        return out

    def apply(self, w) -> np.ndarray:
        return self.gather([L.S @ self.local(w, i) for i, L in enumerate(self.locals)])

    def energy(self, w) -> float:
        return float(sum(self.local(w, i) @ L.S @ self.local(w, i) for i, L in enumerate(self.locals)))

    def _factor(self):
        coarse = np.zeros((self.n_primal, self.n_primal))
        for i, L in enumerate(self.locals):
            K_dd = L.S[np.ix_(L.dual_local, L.dual_local)]
            K_dp = L.S[np.ix_(L.dual_local, L.primal_local)]
            K_pp = L.S[np.ix_(L.primal_local, L.primal_local)]
            if len(L.dual_local):
                try:
                    L.chol = sla.cho_factor(K_dd)
                except np.linalg.LinAlgError as exc:
                    raise SingularCoarseError(f"subdomain {i}: dual block is singular") from exc
                local_coarse = K_pp - K_dp.T @ sla.cho_solve(L.chol, K_dp)
            else:
                local_coarse = K_pp
            L.K_dp = K_dp
            coarse[np.ix_(L.primal_glob, L.primal_glob)] += local_coarse
        self.coarse = 0.5 * (coarse + coarse.T)
        if self.n_primal:
            try:
                self._coarse_chol = sla.cho_factor(self.coarse)
            except np.linalg.LinAlgError as exc:
                raise SingularCoarseError("coarse matrix is singular") from exc

    def _dual_solve(self, L, b):
        return sla.cho_solve(L.chol, b) if len(L.dual_local) else b

    def solve(self, f) -> np.ndarray:
        """``S~^{-1} f`` by eliminating the dual dofs subdomain by subdomain."""
        g = self.primal_part(f).copy()
        for i, L in enumerate(self.locals):
            if len(L.dual_local):
                np.add.at(g, L.primal_glob, -L.K_dp.T @ self._dual_solve(L, self.dual_part(f, i)))
        u = np.zeros(self.n)
        up = sla.cho_solve(self._coarse_chol, g) if self.n_primal else g
        u[self.n_dual:] = up
        for i, L in enumerate(self.locals):
            if len(L.dual_local):
                rhs = self.dual_part(f, i) - L.K_dp @ up[L.primal_glob]
                u[L.dual_off:L.dual_off + len(L.dual_local)] = self._dual_solve(L, rhs)
        return u

    def dense(self) -> np.ndarray:
        out = np.empty((self.n, self.n))
        e = np.zeros(self.n)
        for j in range(self.n):
            e[j] = 1.0
            out[:, j] = self.apply(e)
            e[j] = 0.0
        return out


def transformed_scalings(dec: Decomposition, scaling: ScalingSet, bases) -> dict:
    """``D~_C^(s) = P_C^{-1} D_C^(s) P_C`` for every class."""
    out = {}
    for c in dec.classes:
        B = bases[c.id]
        out[c.id] = {s: transform_scaling(D, B.P) for s, D in scaling.blocks[c.id].items()}
    return out


@dataclass
class BDDCPreconditioner:
    """``M^{-1} = E_D S~^{-1} E_D^T`` with ``E_D w~ = sum_i R_i^T D_i w~_i``.

    ``D_i`` is block diagonal over subdomain ``i``'s classes with the
    transformed scaling blocks, so the primal rows of ``E_D`` include the
    cross-subdomain primal-dual couplings of the transformed scaling.
    """

    op: PartiallyCoupledOperator
    scaling: ScalingSet
    D_local: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        dec = self.op.dec
        Dt = transformed_scalings(dec, self.scaling, self.op.bases)
        self.transformed = Dt
        self.D_local = [_block_diag([Dt[c][i] for c in dec.sub_classes[i]])
                        for i in range(dec.num_subdomains)]

    @property
    def dec(self) -> Decomposition:
        return self.op.dec

    def average(self, w) -> np.ndarray:
        """``E_D``: W~ -> assembled interface space (transformed)."""
        out = np.zeros(self.dec.n_interface)
        for i, D in enumerate(self.D_local):
            self.dec.extend(i, D @ self.op.local(w, i), out)
        return out

    def average_transpose(self, r) -> np.ndarray:
        return self.op.gather([D.T @ self.dec.restrict(i, r) for i, D in enumerate(self.D_local)])

    def restrict_tilde(self, w_hat) -> np.ndarray:
        """``R~``: assembled interface vector -> W~."""
        out = np.empty(self.op.n)
        for i, L in enumerate(self.op.locals):
            out[L.dual_off:L.dual_off + len(L.dual_local)] = self.dec.restrict(i, w_hat)[L.dual_local]
        out[self.op.n_dual:] = w_hat[self.op.hat_primal]
        return out

    def extend_tilde(self, w) -> np.ndarray:
        """``R~^T``: W~ -> assembled interface vector, summing duplicated duals."""
        out = np.zeros(self.dec.n_interface)
        for i, L in enumerate(self.op.locals):
            loc = np.zeros(L.S.shape[0])
            loc[L.dual_local] = self.op.dual_part(w, i)
            self.dec.extend(i, loc, out)
        out[self.op.hat_primal] += self.op.primal_part(w)
        return out

    def projection(self, w) -> np.ndarray:
        """``R~ E_D`` as a map on W~."""
        return self.restrict_tilde(self.average(w))

    def apply(self, r) -> np.ndarray:
        return self.average(self.op.solve(self.average_transpose(r)))

    __call__ = apply


class InterfaceOperator:
    """``S^ = sum_i R_i^T S^(i)_t R_i`` on the assembled interface, transformed."""

    def __init__(self, op: PartiallyCoupledOperator):
        self.op = op
        self.dec = op.dec

    @property
    def n(self) -> int:
        return self.dec.n_interface

    def apply(self, w) -> np.ndarray:
        out = np.zeros(self.n)
        for i, L in enumerate(self.op.locals):
            self.dec.extend(i, L.S @ self.dec.restrict(i, w), out)
        return out

    __call__ = apply

    def to_transformed(self, w_hat) -> np.ndarray:
        out = np.empty_like(w_hat, dtype=float)
        for c in self.dec.classes:
            out[c.slice] = self.op.bases[c.id].Pinv @ w_hat[c.slice]
        return out

    def from_transformed(self, w_t) -> np.ndarray:
        out = np.empty_like(w_t, dtype=float)
        for c in self.dec.classes:
            out[c.slice] = self.op.bases[c.id].P @ w_t[c.slice]
        return out

    def transform_rhs(self, g_hat) -> np.ndarray:
        """Load vectors transform with ``P^T``."""
        out = np.empty_like(g_hat, dtype=float)
        for c in self.dec.classes:
            out[c.slice] = self.op.bases[c.id].P.T @ g_hat[c.slice]
        return out


def assemble_rhs(dec: Decomposition, schur) -> np.ndarray:
    """Condensed interface load ``g = sum_i R_i^T g_i`` (untransformed)."""
    g = np.zeros(dec.n_interface)
    for i, so in enumerate(schur):
        dec.extend(i, so.condensed_rhs(), g)
    return g


def averaging_energy_ratios(prec: BDDCPreconditioner, samples: int = 50, seed: int = 0) -> np.ndarray:
    """``<S~ (I - R~E_D) w, (I - R~E_D) w> / <S~ w, w>`` on random ``w`` in W~."""
    rng = np.random.default_rng(seed)
    op = prec.op
    out = np.empty(samples)
    for s in range(samples):
        w = rng.standard_normal(op.n)
        v = w - prec.projection(w)
        out[s] = op.energy(v) / op.energy(w)
    return out
