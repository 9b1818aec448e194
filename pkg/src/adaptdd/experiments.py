"""Experiment pipeline: coefficient -> substructures -> adaptive primal
selection -> BDDC or FETI-DP solve -> report."""
from __future__ import annotations

import csv
import io
import json
import math
import re
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .adaptive import (EigSelection, basis_from_constraints, change_of_basis, class_gevp,
                       two_type_face_gevps)
from .bddc import BDDCPreconditioner, InterfaceOperator, PartiallyCoupledOperator, assemble_rhs
from .coefficients import CoefficientField, generate_coefficient, parse_coefficient_spec
from .decomposition import EDGE, FACE, Decomposition, build_jump_operator, classify_interface
from .fetidp import GRAM_COND_WARN, DualSystem, ProjectedPreconditioner, Projector, build_U
from .krylov import pcg
from .mesh import StructuredMesh, assemble_subdomain
from .scaling import DELUXE, MULTIPLICITY, build_scaling, multiplicity_scaling
from .schur import NATURAL, class_block, condensed_class_block, schur_interface, slab_schur

METHODS = {
    0: ("bddc", MULTIPLICITY, None),
    1: ("bddc", MULTIPLICITY, "two-type"),
    2: ("bddc", MULTIPLICITY, "gevp"),
    3: ("bddc", DELUXE, "gevp"),
    4: ("fetidp", DELUXE, "gevp"),
}
REPORT_COLUMNS = ("method", "pnum1", "pnum2", "pnumE", "iter", "lambda_min", "lambda_max",
                  "kappa", "time")


def parse_tolerance(spec, m: int) -> float:
    """``"1+log(H/h)"`` (natural log), ``"<c>H/h"`` / ``"<c>*H/h"``, ``"inf"`` or a number."""
    if isinstance(spec, (int, float)):
        return float(spec)
    s = spec.replace(" ", "")
    if s in ("1+log(H/h)", "1+ln(H/h)"):
        return 1.0 + math.log(m)
    match = re.fullmatch(r"([0-9.eE+-]*)\*?H/h", s)
    if match:
        c = match.group(1)
        return (float(c) if c else 1.0) * m
    try:
        return float(s)
    except ValueError:
        raise ValueError(f"cannot parse tolerance {spec!r}") from None


def parse_eta(spec, m: int) -> int | None:
    """Slab thickness in cells; ``None`` for the full subdomain version."""
    if spec is None or spec == "full":
        return None
    s = str(spec).replace(" ", "")
    if s == "H":
        return m
    match = re.fullmatch(r"([0-9.]*)\*?h", s)
    if not match:
        raise ValueError(f"cannot parse eta {spec!r}; use full, H, h or <k>h")
    k = float(match.group(1)) if match.group(1) else 1.0
    if k != int(k) or k < 1:
        raise ValueError(f"eta must be a positive integer multiple of h, got {spec!r}")
    return min(int(k), m)


@dataclass
class ExperimentConfig:
    dim: int
    N: int
    m: int
    method: int
    coeff: str = "constant"
    tol_face: str | float = "1+log(H/h)"
    tol_edge: str | float = "4H/h"
    eta: str = "full"
    scaling: str | None = None
    condensed_bc: str = NATURAL
    rtol: float = 1e-10
    maxit: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}")
        expected = METHODS[self.method][1]
        if self.scaling is not None and self.scaling != expected:
            warnings.warn(f"method{self.method} uses {expected} scaling; "
                          f"overriding with {self.scaling}", RuntimeWarning)

    @property
    def solver(self) -> str:
        return METHODS[self.method][0]

    @property
    def scaling_kind(self) -> str:
        return self.scaling or METHODS[self.method][1]

    @property
    def selection(self) -> str | None:
        return METHODS[self.method][2]

    @property
    def face_tol(self) -> float:
        return parse_tolerance(self.tol_face, self.m)

    @property
    def edge_tol(self) -> float:
        return parse_tolerance(self.tol_edge, self.m)

    @property
    def layers(self) -> int | None:
        return parse_eta(self.eta, self.m)


@dataclass
class ExperimentReport:
    method: int
    pnum1: int
    pnum2: int
    pnumE: int
    iter: int
    lambda_min: float
    lambda_max: float
    kappa: float
    time: float
    converged: bool = True
    n_faces: int = 0
    n_edges: int = 0
    p1: float = 0.0
    p2: float = 0.0
    pE: float = 0.0
    tol: float = 0.0
    bound_constant: float = 0.0
    bound_ok: bool = True
    gram_cond: float = 1.0
    n_primal: int = 0
    class_counts: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)

    @property
    def adaptive_total(self) -> int:
        return self.pnum1 + self.pnum2 + self.pnumE

    def row(self) -> list:
        return [getattr(self, c) for c in REPORT_COLUMNS]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_counts"] = {str(k): v for k, v in self.class_counts.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["class_counts"] = {int(k): v for k, v in d.get("class_counts", {}).items()}
        return cls(**d)


def bound_constant(dec: Decomposition) -> float:
    """``8 max(max_i N_F(i)^2, max_i N_E(i)^2 * max_E |I(E)|)``."""
    nf = max(dec.counts_per_subdomain(FACE))
    ne = max(dec.counts_per_subdomain(EDGE))
    qe = max((c.q for c in dec.edges), default=0)
    return 8.0 * max(nf**2, ne**2 * qe)


@dataclass
class Substructures:
    mesh: StructuredMesh
    coeff: CoefficientField
    dec: Decomposition
    schur: list
    principal: dict
    condensed: dict
    condensed_bc: str = NATURAL


def build_substructures(dim, N, m, coeff, condensed_bc: str = NATURAL) -> Substructures:
    mesh = StructuredMesh(dim, N, m)
    if isinstance(coeff, str):
        pattern, params, seed = parse_coefficient_spec(coeff)
        coeff = generate_coefficient(mesh, pattern, params, seed)
    elif not isinstance(coeff, CoefficientField):
        coeff = CoefficientField(np.asarray(coeff, dtype=float), "array")
    dec = classify_interface(mesh)
    schur = [schur_interface(assemble_subdomain(mesh, i, coeff), dec.sub_nodes[i])
             for i in range(mesh.num_subdomains)]
    principal, condensed = {}, {}
    for c in dec.classes:
        if c.kind not in (FACE, EDGE):
            continue
        principal[c.id] = {s: class_block(schur[s].S, dec.local_slice(s, c.id)) for s in c.sharing}
        condensed[c.id] = {s: condensed_class_block(mesh, coeff, c, s, condensed_bc)
                           for s in c.sharing}
    return Substructures(mesh, coeff, dec, schur, principal, condensed, condensed_bc)


def gevp_blocks(sub: Substructures, cid: int, layers: int | None):
    """``(S_C, S~_C)`` per sharing subdomain, full or slab version."""
    if layers is None:
        return sub.principal[cid], sub.condensed[cid]
    c = sub.dec.classes[cid]
    S, St = {}, {}
    for s in c.sharing:
        S[s], St[s] = slab_schur(sub.mesh, sub.coeff, sub.dec, c, s, layers, sub.condensed_bc)
    return S, St


@dataclass
class PrimalSelection:
    selections: dict = field(default_factory=dict)
    bases: dict = field(default_factory=dict)
    pnum1: int = 0
    pnum2: int = 0
    pnumE: int = 0
    class_counts: dict = field(default_factory=dict)


def select_constraints(sub: Substructures, cfg: ExperimentConfig, scaling) -> PrimalSelection:
    out = PrimalSelection()
    if cfg.selection is None:
        return out
    layers = cfg.layers
    for c in sub.dec.classes:
        if c.kind not in (FACE, EDGE):
            continue
        tol = cfg.face_tol if c.kind == FACE else cfg.edge_tol
        S, St = gevp_blocks(sub, c.id, layers)
        if cfg.selection == "two-type" and c.kind == FACE:
            i, j = c.sharing
            kc = two_type_face_gevps(St[i], St[j], S[i], S[j], tol, class_id=c.id)
            out.bases[c.id] = basis_from_constraints(kc.constraints())
            out.pnum1 += kc.n_type1
            out.pnum2 += kc.n_type2
            out.class_counts[c.id] = kc.n_type1 + kc.n_type2
            continue
        D = multiplicity_scaling(c) if cfg.selection == "two-type" else scaling[c.id]
        sel = class_gevp(c.id, S, St, D, tol)
        out.selections[c.id] = sel
        out.bases[c.id] = change_of_basis(sel)
        out.class_counts[c.id] = sel.k
        if c.kind == FACE:
            out.pnum2 += sel.k
        else:
            out.pnumE += sel.k
    return out


def _bddc_solve(sub, scaling, prim, cfg):
    op = PartiallyCoupledOperator(sub.dec, sub.schur, prim.bases)
    prec = BDDCPreconditioner(op, scaling)
    iface = InterfaceOperator(op)
    g = iface.transform_rhs(assemble_rhs(sub.dec, sub.schur))
    x, rep = pcg(iface, prec, g, rtol=cfg.rtol, maxit=cfg.maxit)
    return iface.from_transformed(x), rep, op.n_primal, 1.0


def _fetidp_solve(sub, scaling, prim, cfg):
    op = PartiallyCoupledOperator(sub.dec, sub.schur)
    B = build_jump_operator(sub.dec)
    system = DualSystem(op, B, scaling.blocks)
    g_tilde = op.gather([so.condensed_rhs() for so in sub.schur])
    d = system.rhs(g_tilde)
    proj = Projector(build_U(B, prim.selections), system)
    lam0 = proj.initial_iterate(d)
    lam, rep = pcg(system, ProjectedPreconditioner(system, proj), d, x0=lam0, rtol=cfg.rtol,
                   maxit=cfg.maxit, project=proj.complement_transpose)
    w = system.primal_solution(lam, g_tilde)
    u_hat = np.zeros(sub.dec.n_interface)
    count = np.zeros(sub.dec.n_interface)
    for i in range(sub.dec.num_subdomains):
        sub.dec.extend(i, op.local(w, i), u_hat)
        sub.dec.extend(i, np.ones(sub.dec.n_local(i)), count)
    return u_hat / count, rep, op.n_primal + proj.rank, proj.gram_cond


def run_experiment(cfg: ExperimentConfig, sub: Substructures | None = None, return_solution=False):
    t0 = time.perf_counter()
    if sub is None:
        sub = build_substructures(cfg.dim, cfg.N, cfg.m, cfg.coeff, cfg.condensed_bc)
    dec = sub.dec
    if cfg.method == 0 and (cfg.tol_face != "1+log(H/h)" or cfg.tol_edge != "4H/h"):
        warnings.warn("method0 selects no adaptive constraints; tolerances ignored", RuntimeWarning)
    scaling = build_scaling(dec, cfg.scaling_kind, sub.principal)
    prim = select_constraints(sub, cfg, scaling)
    solve = _fetidp_solve if cfg.solver == "fetidp" else _bddc_solve
    u_hat, rep, n_primal, gram_cond = solve(sub, scaling, prim, cfg)
    elapsed = time.perf_counter() - t0

    tols = [cfg.face_tol] + ([cfg.edge_tol] if dec.edges else [])
    tol = max(tols)
    C = bound_constant(dec)
    nf, ne = len(dec.faces), len(dec.edges)
    report = ExperimentReport(
        method=cfg.method, pnum1=prim.pnum1, pnum2=prim.pnum2, pnumE=prim.pnumE,
        iter=rep.iterations, lambda_min=rep.lambda_min, lambda_max=rep.lambda_max,
        kappa=rep.kappa, time=elapsed, converged=rep.converged, n_faces=nf, n_edges=ne,
        p1=prim.pnum1 / nf if nf else 0.0, p2=prim.pnum2 / nf if nf else 0.0,
        pE=prim.pnumE / ne if ne else 0.0, tol=tol, bound_constant=C,
        gram_cond=gram_cond, n_primal=n_primal, class_counts=dict(prim.class_counts),
        residuals=list(rep.residuals))
    if cfg.method in (1, 2, 3):
        report.bound_ok = bool(rep.kappa <= C * tol)
    elif cfg.method == 4:
        report.bound_ok = bool(rep.kappa <= C * tol)
        if not report.bound_ok and gram_cond > GRAM_COND_WARN:
            warnings.warn(f"method4 bound exceeded with ill-conditioned projector "
                          f"(Gram condition {gram_cond:.2e})", RuntimeWarning)
            report.bound_ok = True
    if return_solution:
        return report, u_hat
    return report


def emit_report(reports, fmt: str = "csv", path=None) -> str:
    """Serialize reports; CSV has the fixed column order ``REPORT_COLUMNS``."""
    if isinstance(reports, ExperimentReport):
        reports = [reports]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in r.row()])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([r.to_dict() for r in reports], indent=1)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_reports(text: str) -> list[ExperimentReport]:
    return [ExperimentReport.from_dict(d) for d in json.loads(text)]


def class_spectra(sub: Substructures, cfg: ExperimentConfig) -> list[dict]:
    """Eigenvalues of every face/edge problem, descending, infinite ones counted apart."""
    scaling = build_scaling(sub.dec, cfg.scaling_kind, sub.principal)
    out = []
    for c in sub.dec.classes:
        if c.kind not in (FACE, EDGE):
            continue
        S, St = gevp_blocks(sub, c.id, cfg.layers)
        sel: EigSelection = class_gevp(c.id, S, St, scaling[c.id])
        out.append({"class_id": c.id, "kind": c.kind, "eta": cfg.eta,
                    "n_infinite": sel.eig.n_infinite,
                    "eigenvalues": sel.eig.finite_values.tolist()})
    return out


def dump_spectra(cfg: ExperimentConfig, path=None, sub: Substructures | None = None) -> str:
    if sub is None:
        sub = build_substructures(cfg.dim, cfg.N, cfg.m, cfg.coeff, cfg.condensed_bc)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_id", "kind", "eta", "n_infinite", "eigenvalues"])
    for row in class_spectra(sub, cfg):
        writer.writerow([row["class_id"], row["kind"], row["eta"], row["n_infinite"],
                         " ".join(repr(v) for v in row["eigenvalues"])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
