"""Subdomain Schur complements and their per-class blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .decomposition import Decomposition, EquivalenceClass
from .linalg import sym
from .mesh import LocalSystem, StructuredMesh, assemble_cells


class SingularBlockError(RuntimeError):
    pass


def schur_onto(M: np.ndarray, keep) -> np.ndarray:
    """Dense Schur complement of ``M`` onto the index set ``keep``."""
    n = M.shape[0]
    keep = np.asarray(keep, dtype=int)
    rest = np.setdiff1d(np.arange(n), keep)
    Mkk = M[np.ix_(keep, keep)]
    if rest.size == 0:
        return sym(Mkk)
    Mrr = M[np.ix_(rest, rest)]
    Mrk = M[np.ix_(rest, keep)]
    try:
        X = sla.cho_solve(sla.cho_factor(Mrr), Mrk)
    except np.linalg.LinAlgError:
        X = np.linalg.lstsq(Mrr, Mrk, rcond=None)[0]
    return sym(Mkk - Mrk.T @ X)


def _sparse_schur(A: sp.csr_matrix, inner, outer):
    """Schur complement of sparse ``A`` onto ``outer`` eliminating ``inner``."""
    A_oo = A[outer][:, outer].toarray()
    if len(inner) == 0:
        return sym(A_oo), None, None
    A_ii = A[inner][:, inner].tocsc()
    A_io = A[inner][:, outer].toarray()
    try:
        lu = spla.splu(A_ii)
    except RuntimeError as exc:
        raise SingularBlockError("interior block is singular") from exc
    X = lu.solve(A_io)
    if not np.all(np.isfinite(X)):
        raise SingularBlockError("interior block is singular")
    return sym(A_oo - A_io.T @ X), lu, A_io


@dataclass
class SchurOperator:
    """``S = A_GG - A_GI A_II^{-1} A_IG`` on the subdomain interface.

    Rows/columns follow ``gamma`` (local dof indices of the interface in the
    requested order).  The interior LU factor is kept for RHS condensation
    and interior recovery.
    """

    subdomain: int
    S: np.ndarray
    local: LocalSystem = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)
    lu: object = field(repr=False, default=None)
    A_ig: np.ndarray | None = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.S @ w

    def condensed_rhs(self) -> np.ndarray:
        f = self.local.f
        g = f[self.gamma].copy()
        if self.lu is not None:
            g -= self.A_ig.T @ self.lu.solve(f[self.interior])
        return g

    def interior_solution(self, w_gamma: np.ndarray) -> np.ndarray:
        """Discrete harmonic (plus particular) extension into the interior."""
        if self.lu is None:
            return np.zeros(0)
        return self.lu.solve(self.local.f[self.interior] - self.A_ig @ w_gamma)


def schur_interface(local: LocalSystem, interface_nodes=None) -> SchurOperator:
    gamma = local.interface if interface_nodes is None else local.local_index(interface_nodes)
    if len(gamma) != len(local.interface):
        raise ValueError("interface ordering does not cover the subdomain interface")
    S, lu, A_io = _sparse_schur(local.A, local.interior, gamma)
    return SchurOperator(local.subdomain, S, local, gamma, local.interior, lu, A_io)


def class_block(S: np.ndarray, idx) -> np.ndarray:
    """Principal block of ``S`` on the index set (or slice) ``idx``."""
    if isinstance(idx, slice):
        return S[idx, idx].copy()
    idx = np.asarray(idx, dtype=int)
    return S[np.ix_(idx, idx)]


def class_schur(S: np.ndarray, idx) -> np.ndarray:
    """Schur complement of ``S`` onto ``idx``, eliminating every other interface dof.

    Since Schur complements compose, this equals eliminating all subdomain
    dofs outside ``idx`` from the stiffness matrix with the nodes on the
    outer boundary held at zero.
    """
    if isinstance(idx, slice):
        idx = np.arange(S.shape[0])[idx]
    return schur_onto(S, idx)


NATURAL, DIRICHLET = "natural", "dirichlet"


def _closure_nodes(mesh: StructuredMesh, cells) -> np.ndarray:
    return np.unique(mesh.cell_corner_nodes(cells))


def _strictly_inside(mesh: StructuredMesh, sub: int, nodes) -> np.ndarray:
    rel = mesh.node_coords[nodes] - mesh.subdomain_box(sub) * mesh.m
    return np.all((rel > 0) & (rel < mesh.m), axis=1)


def _condense(mesh, cells, rho, dofs, keep_nodes) -> np.ndarray:
    A, _ = assemble_cells(mesh, cells, rho, dofs)
    pos = np.searchsorted(dofs, keep_nodes)
    if np.any(dofs[np.minimum(pos, len(dofs) - 1)] != keep_nodes):
        raise ValueError("class nodes are not dofs of the assembled region")
    return schur_onto(A.toarray(), pos)


def condensed_class_block(mesh: StructuredMesh, coeff, cls: EquivalenceClass, sub: int,
                          boundary: str = NATURAL, cells=None) -> np.ndarray:
    """``S~_C`` of subdomain ``sub``: every dof of the region except ``C`` eliminated.

    With ``boundary="natural"`` the nodes on the outer boundary are kept
    as unknowns of the Neumann matrix (so floating and boundary subdomains
    are treated alike); ``"dirichlet"`` fixes them to zero, which equals
    ``class_schur`` of the interface Schur complement.  ``cells`` restricts
    the region (slab version); cut nodes are then free.
    """
    rho = getattr(coeff, "values", coeff)
    cells = mesh.subdomain_cells(sub) if cells is None else cells
    dofs = _closure_nodes(mesh, cells)
    if boundary == DIRICHLET:
        dofs = dofs[~mesh.boundary_mask[dofs]]
    elif boundary != NATURAL:
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    return _condense(mesh, cells, rho, dofs, np.asarray(cls.nodes))


def slab_cells(mesh: StructuredMesh, cls: EquivalenceClass, sub: int, layers: int) -> np.ndarray:
    """Cells of subdomain ``sub`` lying within ``layers`` cells of the closure of ``cls``.

    Distance is the max-norm: a cell is kept if it fits, along every axis,
    inside the bounding box of the class closure grown by ``layers`` cells.
    """
    if layers < 1 or int(layers) != layers:
        raise ValueError(f"slab thickness must be a positive number of cells, got {layers}")
    cells = mesh.subdomain_cells(sub)
    cc = mesh.cell_coords[cells]
    nodes = mesh.node_coords[cls.nodes]
    sub_lo = mesh.subdomain_box(sub) * mesh.m
    # class closures span whole subdomain segments along axes not pinned to a grid line
    pinned = np.all(nodes % mesh.m == 0, axis=0)
    lo = np.where(pinned, nodes[0], sub_lo)
    hi = np.where(pinned, nodes[0], sub_lo + mesh.m)
    inside = np.all((cc >= lo - layers) & (cc + 1 <= hi + layers), axis=1)
    return cells[inside]


def slab_schur(mesh: StructuredMesh, coeff, dec: Decomposition, cls: EquivalenceClass,
               sub: int, layers: int, boundary: str = NATURAL):
    """Economic (slab) versions of ``S_C`` and ``S~_C`` for one subdomain.

    Stiffness is assembled on the slab cells only and the cut through the
    subdomain carries natural boundary conditions.  ``S_C``: class values
    extended harmonically into the slab with zero on the rest of the
    subdomain boundary.  ``S~_C``: every other slab node eliminated, outer
    boundary nodes treated per ``boundary``.  With ``layers = H/h`` both
    coincide with the full versions.  Returns ``(S_C, S~_C)``.
    """
    if sub not in cls.sharing:
        raise ValueError(f"subdomain {sub} does not share class {cls.id}")
    rho = getattr(coeff, "values", coeff)
    cells = slab_cells(mesh, cls, sub, layers)
    nodes = _closure_nodes(mesh, cells)
    inner = nodes[_strictly_inside(mesh, sub, nodes)]
    dofs = np.union1d(inner, cls.nodes)
    S_C = _condense(mesh, cells, rho, dofs, np.asarray(cls.nodes))
    S_t = condensed_class_block(mesh, coeff, cls, sub, boundary, cells)
    return S_C, S_t
