"""Interface equivalence classes, restriction maps and jump operators.

The global interface vector is the concatenation of the class-interior
dofs of all classes in class-id order.  Each subdomain's local interface
vector is the concatenation, in the same order, of the classes it touches.
Both orderings are geometric (sorted global node id), so class blocks match
across subdomains without permutation.
"""
from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import StructuredMesh

FACE, EDGE, VERTEX = "face", "edge", "vertex"
_KIND_ORDER = {FACE: 0, EDGE: 1, VERTEX: 2}


@dataclass(frozen=True, eq=False)
class EquivalenceClass:
    id: int
    kind: str
    sharing: tuple[int, ...]
    nodes: np.ndarray
    offset: int

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def q(self) -> int:
        return len(self.sharing)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(self.sharing, 2))

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass
class Decomposition:
    mesh: StructuredMesh
    classes: list[EquivalenceClass]
    n_interface: int
    sub_classes: list[list[int]]
    sub_offsets: list[dict[int, int]]
    sub_nodes: list[np.ndarray] = field(repr=False)
    sub_global: list[np.ndarray] = field(repr=False)

    @property
    def num_subdomains(self) -> int:
        return len(self.sub_classes)

    def of_kind(self, kind: str) -> list[EquivalenceClass]:
        return [c for c in self.classes if c.kind == kind]

    @property
    def faces(self):
        return self.of_kind(FACE)

    @property
    def edges(self):
        return self.of_kind(EDGE)

    @property
    def vertices(self):
        return self.of_kind(VERTEX)

    def local_slice(self, i: int, c: int) -> slice:
        off = self.sub_offsets[i][c]
        return slice(off, off + self.classes[c].size)

    def n_local(self, i: int) -> int:
        return len(self.sub_nodes[i])

    def restrict(self, i: int, w_hat: np.ndarray) -> np.ndarray:
        """``R_i``: global interface vector -> local interface vector of subdomain ``i``."""
        return w_hat[self.sub_global[i]]

    def extend(self, i: int, w_loc: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """``R_i^T``: scatter-add a local interface vector into the global one."""
        if out is None:
            out = np.zeros(self.n_interface)
        np.add.at(out, self.sub_global[i], w_loc)
        return out

    def class_report(self) -> list[dict]:
        return [{"id": c.id, "kind": c.kind, "sharing": list(c.sharing), "q": c.q,
                 "dofs": c.size} for c in self.classes]

    def class_report_json(self) -> str:
        return json.dumps(self.class_report(), indent=1)

    def counts_per_subdomain(self, kind: str) -> list[int]:
        return [sum(1 for c in cl if self.classes[c].kind == kind) for cl in self.sub_classes]


def _kind_from_geometry(mesh: StructuredMesh, node: int) -> str:
    c = mesh.node_coords[node]
    on_lines = int(np.sum((c % mesh.m == 0) & (c > 0) & (c < mesh.n)))
    if on_lines == mesh.dim:
        return VERTEX
    if on_lines == mesh.dim - 1 and mesh.dim == 3:
        return EDGE
    if on_lines == 1:
        return FACE
    raise AssertionError(f"node {node} is not on the interface")


def classify_interface(mesh: StructuredMesh) -> Decomposition:
    groups: dict[tuple, list[int]] = defaultdict(list)
    free = np.flatnonzero(~mesh.boundary_mask)
    for node in free:
        sharing = mesh.sharing_subdomains(int(node))
        if len(sharing) < 2:
            continue
        kind = _kind_from_geometry(mesh, int(node))
        q = len(sharing)
        # cardinality cross-check
        if (kind == FACE and q != 2) or (kind == EDGE and q < 3) or (kind == VERTEX and q < 3 and mesh.dim > 1):
            raise AssertionError(f"node {node}: {kind} with {q} sharing subdomains")
        groups[(kind, sharing)].append(int(node))

    keys = sorted(groups, key=lambda k: (_KIND_ORDER[k[0]], k[1]))
    classes, offset = [], 0
    for cid, key in enumerate(keys):
        nodes = np.array(sorted(groups[key]), dtype=np.int64)
        kind, sharing = key
        if kind == VERTEX and len(nodes) != 1:
            raise AssertionError(f"vertex class {sharing} has {len(nodes)} nodes")
        if kind == EDGE:
            _check_chain(mesh, nodes)
        classes.append(EquivalenceClass(cid, kind, sharing, nodes, offset))
        offset += len(nodes)

    nsub = mesh.num_subdomains
    sub_classes = [[] for _ in range(nsub)]
    for c in classes:
        for s in c.sharing:
            sub_classes[s].append(c.id)
    sub_offsets, sub_nodes, sub_global = [], [], []
    for i in range(nsub):
        offs, off, nodes, glob = {}, 0, [], []
        for cid in sub_classes[i]:
            c = classes[cid]
            offs[cid] = off
            off += c.size
            nodes.append(c.nodes)
            glob.append(np.arange(c.offset, c.offset + c.size))
        sub_offsets.append(offs)
        sub_nodes.append(np.concatenate(nodes) if nodes else np.zeros(0, dtype=np.int64))
        sub_global.append(np.concatenate(glob) if glob else np.zeros(0, dtype=np.int64))
    return Decomposition(mesh, classes, offset, sub_classes, sub_offsets, sub_nodes, sub_global)


def _check_chain(mesh, nodes):
    c = mesh.node_coords[nodes]
    varying = np.flatnonzero(np.ptp(c, axis=0) > 0)
    if len(nodes) > 1 and (len(varying) != 1 or np.any(np.diff(np.sort(c[:, varying[0]])) != 1)):
        raise AssertionError("edge class dofs do not form a lattice chain")


@dataclass
class JumpOperator:
    """Fully redundant signed incidence ``B``, stored per subdomain.

    ``blocks[i]`` acts on subdomain ``i``'s local interface vector (zero
    columns on vertex dofs).  Row ``r`` enforces ``w^(l) - w^(m)`` at one
    dof of class ``row_class[r]`` for the pair ``(row_l[r], row_m[r])``.
    """

    decomposition: Decomposition
    blocks: list[sp.csr_matrix]
    row_class: np.ndarray
    row_l: np.ndarray
    row_m: np.ndarray
    row_pos: np.ndarray
    pair_rows: dict[tuple[int, int, int], slice]

    @property
    def n_rows(self) -> int:
        return len(self.row_class)

    def apply_local(self, local_vectors) -> np.ndarray:
        out = np.zeros(self.n_rows)
        for Bi, wi in zip(self.blocks, local_vectors):
            out += Bi @ wi
        return out

    def transpose_local(self, lam) -> list[np.ndarray]:
        return [Bi.T @ lam for Bi in self.blocks]

    def dense(self) -> list[np.ndarray]:
        return [Bi.toarray() for Bi in self.blocks]


def build_jump_operator(dec: Decomposition) -> JumpOperator:
    rows_c, rows_l, rows_m, rows_p = [], [], [], []
    entries = [([], [], []) for _ in range(dec.num_subdomains)]
    pair_rows = {}
    r = 0
    for c in dec.classes:
        if c.kind == VERTEX:
            continue
        for l, m in c.pairs:
            pair_rows[(c.id, l, m)] = slice(r, r + c.size)
            for sub, sign in ((l, 1.0), (m, -1.0)):
                base = dec.sub_offsets[sub][c.id]
                ri, ci, vi = entries[sub]
                ri.extend(range(r, r + c.size))
                ci.extend(range(base, base + c.size))
                vi.extend([sign] * c.size)
            rows_c.extend([c.id] * c.size)
            rows_l.extend([l] * c.size)
            rows_m.extend([m] * c.size)
            rows_p.extend(range(c.size))
            r += c.size
    blocks = [sp.csr_matrix((v, (ri, ci)), shape=(r, dec.n_local(i)))
              for i, (ri, ci, v) in enumerate(entries)]
    return JumpOperator(dec, blocks, np.array(rows_c, dtype=int), np.array(rows_l, dtype=int),
                        np.array(rows_m, dtype=int), np.array(rows_p, dtype=int), pair_rows)


def build_scaled_jump(B: JumpOperator, scalings) -> list[sp.csr_matrix]:
    """Blocks of ``B_D``.

    Rows of pair ``(l, m)`` on class ``C`` get ``+(D_C^(m))^T`` in the block
    of subdomain ``l`` and ``-(D_C^(l))^T`` in the block of ``m``.
    ``scalings[c][s]`` is the scaling matrix of class ``c`` in subdomain ``s``.
    """
    dec = B.decomposition
    blocks = [sp.lil_matrix(Bi.shape) for Bi in B.blocks]
    for (cid, l, m), rows in B.pair_rows.items():
        if cid not in scalings:
            raise KeyError(f"no scaling for class {cid}")
        Dc = scalings[cid]
        for sub, other, sign in ((l, m, 1.0), (m, l, -1.0)):
            cols = dec.local_slice(sub, cid)
            blocks[sub][rows, cols] = sign * np.asarray(Dc[other]).T
    return [b.tocsr() for b in blocks]
