"""Structured meshes of the unit square/cube, P1 element matrices and
per-subdomain stiffness assembly.

Cells are squares (2D) or cubes (3D) of side ``h = 1/(N*m)``.  Every cell is
split into simplices by the Kuhn decomposition along its main diagonal, the
same in every cell, so the triangulation is conforming across subdomain
interfaces.  The coefficient is constant per cell.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class StructuredMesh:
    dim: int
    N: int
    m: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.N < 2:
            raise ValueError("need at least 2 subdomains per direction (N >= 2)")
        if self.m < 2:
            raise ValueError("need at least 2 elements per subdomain direction (m >= 2)")

    @property
    def n(self) -> int:
        """Fine cells per direction."""
        return self.N * self.m

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def H(self) -> float:
        return 1.0 / self.N

    @property
    def num_cells(self) -> int:
        return self.n**self.dim

    @property
    def num_nodes(self) -> int:
        return (self.n + 1) ** self.dim

    @property
    def num_subdomains(self) -> int:
        return self.N**self.dim

    # lexicographic numbering, x fastest
    def node_id(self, *coords) -> np.ndarray:
        return _lex(coords, self.n + 1)

    def cell_id(self, *coords) -> np.ndarray:
        return _lex(coords, self.n)

    def subdomain_id(self, *coords) -> np.ndarray:
        return _lex(coords, self.N)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Integer lattice coordinates of all nodes, shape (num_nodes, dim)."""
        return _lattice(self.n + 1, self.dim)

    @cached_property
    def cell_coords(self) -> np.ndarray:
        return _lattice(self.n, self.dim)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        c = self.node_coords
        return np.any((c == 0) | (c == self.n), axis=1)

    def subdomain_box(self, i: int) -> np.ndarray:
        """Lattice index of subdomain ``i`` per axis."""
        return _lattice(self.N, self.dim)[i]

    def subdomain_cells(self, i: int) -> np.ndarray:
        """Cell ids of subdomain ``i`` in lexicographic order."""
        lo = self.subdomain_box(i) * self.m
        local = _lattice(self.m, self.dim) + lo
        return self.cell_id(*local.T)

    def subdomain_nodes(self, i: int) -> np.ndarray:
        """Non-Dirichlet node ids in the closed box of subdomain ``i``."""
        lo = self.subdomain_box(i) * self.m
        local = _lattice(self.m + 1, self.dim) + lo
        ids = self.node_id(*local.T)
        return ids[~self.boundary_mask[ids]]

    def cell_corner_nodes(self, cells: np.ndarray) -> np.ndarray:
        """Node ids of the 2**dim corners of each cell, shape (len(cells), 2**dim)."""
        cc = self.cell_coords[cells]
        offsets = _lattice(2, self.dim)
        corners = cc[:, None, :] + offsets[None, :, :]
        return self.node_id(*np.moveaxis(corners, -1, 0))

    def sharing_subdomains(self, node: int) -> tuple[int, ...]:
        """Sorted ids of the subdomains whose closure contains ``node``."""
        c = self.node_coords[node]
        per_axis = []
        for a in range(self.dim):
            q, r = divmod(int(c[a]), self.m)
            if r == 0 and 0 < c[a] < self.n:
                per_axis.append((q - 1, q))
            else:
                per_axis.append((min(q, self.N - 1),))
        return tuple(sorted(int(self.subdomain_id(*s)) for s in itertools.product(*per_axis)))


def _lex(coords, size):
    out = np.zeros_like(np.asarray(coords[0]))
    stride = 1
    for c in coords:
        out = out + np.asarray(c) * stride
        stride *= size
    return out


def _lattice(size, dim):
    grids = np.meshgrid(*([np.arange(size)] * dim), indexing="ij")
    # x fastest: reverse axes so the last meshgrid axis varies slowest
    return np.stack([g.ravel(order="F") for g in grids], axis=1)


def build_mesh(dim: int, N: int, m: int) -> StructuredMesh:
    return StructuredMesh(dim, N, m)


def kuhn_simplices(dim: int) -> list[list[int]]:
    """Simplices of the unit square/cube as lists of local corner indices.

    Corner ``(bx, by[, bz])`` has local index ``bx + 2*by + 4*bz``.  Each
    simplex walks from the origin corner to the opposite corner adding one
    unit vector per step, in the order of an axis permutation.
    """
    out = []
    for perm in itertools.permutations(range(dim)):
        verts, cur = [0], 0
        for a in perm:
            cur += 1 << a
            verts.append(cur)
        out.append(verts)
    return out


def element_stiffness(vertices, rho: float) -> np.ndarray:
    """P1 stiffness matrix ``rho * |T| * G G^T`` of one simplex.

    ``vertices`` has shape (dim+1, dim).
    """
    if not rho > 0:
        raise ValueError(f"coefficient must be positive, got {rho}")
    v = np.asarray(vertices, dtype=float)
    d = v.shape[1]
    if v.shape != (d + 1, d):
        raise ValueError(f"expected {d + 1} vertices in R^{d}, got shape {v.shape}")
    M = np.hstack([np.ones((d + 1, 1)), v])
    det = np.linalg.det(M)
    vol = abs(det) / np.prod(np.arange(1, d + 1))
    scale = np.max(np.abs(v - v[0])) if d else 1.0
    if vol <= 1e-14 * max(scale, 1e-300) ** d:
        raise ValueError("degenerate simplex (zero volume)")
    grads = np.linalg.inv(M)[1:, :].T  # row k: gradient of basis function k
    K = rho * vol * grads @ grads.T
    return 0.5 * (K + K.T)


def reference_cell_stiffness(dim: int, h: float = 1.0) -> np.ndarray:
    """Stiffness of one cell of side ``h`` with unit coefficient, summed over its simplices."""
    corners = _lattice(2, dim).astype(float) * h
    K = np.zeros((2**dim, 2**dim))
    for simplex in kuhn_simplices(dim):
        K[np.ix_(simplex, simplex)] += element_stiffness(corners[simplex], 1.0)
    return K


def reference_cell_load(dim: int, h: float = 1.0) -> np.ndarray:
    """Load vector of f = 1 on one cell: each simplex gives vol/(dim+1) per vertex."""
    f = np.zeros(2**dim)
    vol = h**dim / len(kuhn_simplices(dim))
    for simplex in kuhn_simplices(dim):
        f[simplex] += vol / (dim + 1)
    return f


@dataclass
class LocalSystem:
    """Neumann stiffness matrix of one subdomain with Dirichlet nodes removed.

    ``dofs`` holds global node ids; ``interior``/``interface`` index into it.
    """

    subdomain: int
    dofs: np.ndarray
    A: sp.csr_matrix
    f: np.ndarray
    interior: np.ndarray
    interface: np.ndarray
    cells: np.ndarray = field(repr=False)

    def local_index(self, nodes) -> np.ndarray:
        lookup = {int(g): k for k, g in enumerate(self.dofs)}
        try:
            return np.array([lookup[int(g)] for g in nodes], dtype=int)
        except KeyError as exc:
            raise KeyError(f"node {exc.args[0]} is not a dof of subdomain {self.subdomain}") from None


def assemble_cells(mesh: StructuredMesh, cells: np.ndarray, rho: np.ndarray,
                   dofs: np.ndarray, f_value: float = 1.0):
    """Assemble stiffness and load over ``cells`` restricted to node set ``dofs``.

    Rows/columns of nodes outside ``dofs`` (Dirichlet or cut) are dropped.
    """
    cells = np.asarray(cells)
    Kref = reference_cell_stiffness(mesh.dim, mesh.h)
    fref = reference_cell_load(mesh.dim, mesh.h) * f_value
    corners = mesh.cell_corner_nodes(cells)
    g2l = np.full(mesh.num_nodes, -1, dtype=np.int64)
    g2l[dofs] = np.arange(len(dofs))
    loc = g2l[corners]
    nc = corners.shape[1]
    rows = np.repeat(loc, nc, axis=1).ravel()
    cols = np.tile(loc, (1, nc)).ravel()
    vals = (rho[cells][:, None] * Kref.ravel()[None, :]).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = len(dofs)
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A = (0.5 * (A + A.T)).tocsr()
    f = np.zeros(n)
    lf = loc.ravel()
    fv = np.tile(fref, len(cells))
    np.add.at(f, lf[lf >= 0], fv[lf >= 0])
    return A, f


def assemble_subdomain(mesh: StructuredMesh, i: int, coeff, f_value: float = 1.0) -> LocalSystem:
    if not 0 <= i < mesh.num_subdomains:
        raise IndexError(f"subdomain {i} out of range")
    rho = getattr(coeff, "values", coeff)
    cells = mesh.subdomain_cells(i)
    dofs = mesh.subdomain_nodes(i)
    A, f = assemble_cells(mesh, cells, rho, dofs, f_value)
    lo = mesh.subdomain_box(i) * mesh.m
    c = mesh.node_coords[dofs] - lo
    inside = np.all((c > 0) & (c < mesh.m), axis=1)
    return LocalSystem(i, dofs, A, f, np.flatnonzero(inside), np.flatnonzero(~inside), cells)


def assemble_global(mesh: StructuredMesh, coeff, f_value: float = 1.0):
    """Monodomain stiffness and load over all non-Dirichlet nodes."""
    rho = getattr(coeff, "values", coeff)
    dofs = np.flatnonzero(~mesh.boundary_mask)
    A, f = assemble_cells(mesh, np.arange(mesh.num_cells), rho, dofs, f_value)
    return dofs, A, f
