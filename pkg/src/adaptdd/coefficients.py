"""Per-cell coefficient fields and their pattern generators.

Patterns
--------
constant(c)
    Every cell equals ``c``.
channels(count, p)
    In 2D, ``count`` horizontal bars one cell thick crossing each subdomain
    from side to side.  Bar ``k`` sits in cell row ``floor((k+1)*m/(count+1))``
    of the subdomain.  In 3D, ``count`` rods of one-cell square cross-section
    run along x through every subdomain; rod ``k`` occupies cell row
    ``floor((k+1)*m/(count+1))`` in both y and z.  Value ``p`` on the bars,
    1 elsewhere; identical in every subdomain.
random(exp_low, exp_high)
    ``10**r`` with ``r`` uniform in ``(exp_low, exp_high)`` per cell.
fracture(p, count)
    ``count`` cracks.  Each crack is a monotone random lattice walk of cells
    that starts on a random cell of the face x=0 and repeatedly steps +1 in a
    randomly chosen axis (x with probability 1/2, the rest shared evenly by
    the other axes) until it leaves the domain.  Crack cells get ``p``.
file(path)
    Plain text: first line ``dim N m``, then one value per cell in
    lexicographic cell order (x fastest).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import StructuredMesh

PATTERNS = ("constant", "channels", "random", "fracture", "file")


@dataclass
class CoefficientField:
    values: np.ndarray
    pattern: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(self.values > 0):
            raise ValueError("coefficient must be positive in every cell")

    def scaled(self, c: float) -> "CoefficientField":
        return CoefficientField(self.values * c, self.pattern, dict(self.params), self.seed)


def _channel_rows(m: int, count: int) -> list[int]:
    return [((k + 1) * m) // (count + 1) for k in range(count)]


def channel_mask(mesh: StructuredMesh, count: int) -> np.ndarray:
    if count < 1 or count > mesh.m:
        raise ValueError(f"channel count must be in [1, m], got {count}")
    local = mesh.cell_coords % mesh.m
    rows = _channel_rows(mesh.m, count)
    if mesh.dim == 2:
        return np.isin(local[:, 1], rows)
    mask = np.zeros(mesh.num_cells, dtype=bool)
    for r in rows:
        mask |= (local[:, 1] == r) & (local[:, 2] == r)
    return mask


def fracture_mask(mesh: StructuredMesh, count: int, rng: np.random.Generator) -> np.ndarray:
    n, d = mesh.n, mesh.dim
    mask = np.zeros(mesh.num_cells, dtype=bool)
    probs = np.full(d, 0.5 / (d - 1))
    probs[0] = 0.5
    for _ in range(count):
        pos = np.zeros(d, dtype=int)
        pos[1:] = rng.integers(0, n, size=d - 1)
        while np.all(pos < n):
            mask[mesh.cell_id(*pos)] = True
            pos[rng.choice(d, p=probs)] += 1
    return mask


def read_coefficient_file(path, mesh: StructuredMesh | None = None) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: first line must be 'dim N m'")
        dim, N, m = (int(t) for t in header)
        values = np.array([float(line) for line in fh if line.strip()])
    expected = (N * m) ** dim
    if values.size != expected:
        raise ValueError(f"{path}: expected {expected} cell values, found {values.size}")
    if mesh is not None and (dim, N, m) != (mesh.dim, mesh.N, mesh.m):
        raise ValueError(f"{path}: header {(dim, N, m)} does not match mesh "
                         f"{(mesh.dim, mesh.N, mesh.m)}")
    return values


def write_coefficient_file(path, mesh: StructuredMesh, coeff) -> None:
    values = getattr(coeff, "values", coeff)
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.N} {mesh.m}\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def generate_coefficient(mesh: StructuredMesh, pattern: str, params: dict | None = None,
                         seed: int | None = None) -> CoefficientField:
    params = dict(params or {})
    if pattern == "constant":
        values = np.full(mesh.num_cells, float(params.get("c", 1.0)))
    elif pattern == "channels":
        count = int(params.get("count", 1))
        p = float(params.get("p", 1e6))
        values = np.where(channel_mask(mesh, count), p, 1.0)
    elif pattern == "random":
        lo, hi = params.get("exp_range", (-3.0, 3.0))
        rng = np.random.default_rng(seed)
        values = 10.0 ** rng.uniform(lo, hi, size=mesh.num_cells)
    elif pattern == "fracture":
        p = float(params.get("p", 1e6))
        count = int(params.get("count", max(2, mesh.N)))
        rng = np.random.default_rng(seed)
        values = np.where(fracture_mask(mesh, count, rng), p, 1.0)
    elif pattern == "file":
        values = read_coefficient_file(params["path"], mesh)
    else:
        raise ValueError(f"unknown coefficient pattern {pattern!r}; expected one of {PATTERNS}")
    return CoefficientField(values, pattern, params, seed)


def parse_coefficient_spec(spec: str) -> tuple[str, dict, int | None]:
    """Parse CLI selectors such as ``channels:3:1e6`` or ``random:42``."""
    head, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    if head == "constant":
        return "constant", {"c": float(args[0]) if args else 1.0}, None
    if head == "channels":
        count = int(args[0]) if args else 1
        p = float(args[1]) if len(args) > 1 else 1e6
        return "channels", {"count": count, "p": p}, None
    if head == "random":
        seed = int(args[0]) if args else 0
        return "random", {"exp_range": (-3.0, 3.0)}, seed
    if head == "fracture":
        p = float(args[0]) if args else 1e6
        seed = int(args[1]) if len(args) > 1 else 0
        params = {"p": p}
        if len(args) > 2:
            params["count"] = int(args[2])
        return "fracture", params, seed
    if head == "file":
        if not rest:
            raise ValueError("file pattern needs a path: file:PATH")
        return "file", {"path": rest}, None
    raise ValueError(f"unknown coefficient selector {spec!r}")
