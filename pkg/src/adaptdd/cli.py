"""Command line entry point: ``adaptdd run ...`` and ``adaptdd spectra ...``."""
from __future__ import annotations

import argparse
import sys
import warnings

from .experiments import ExperimentConfig, dump_spectra, emit_report, run_experiment

EXIT_OK, EXIT_BOUND = 0, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, choices=(2, 3), required=True)
    p.add_argument("--n", type=int, required=True, help="subdomains per direction")
    p.add_argument("--hh", type=int, required=True, help="elements per subdomain direction (H/h)")
    p.add_argument("--method", type=int, choices=range(5), default=3)
    p.add_argument("--coeff", default="constant",
                   help="constant[:c] | channels:K:P | random:SEED | fracture:P:SEED[:COUNT] | file:PATH")
    p.add_argument("--tol-face", default="1+log(H/h)")
    p.add_argument("--tol-edge", default="4H/h")
    p.add_argument("--eta", default="full", help="full | H | h | <k>h")
    p.add_argument("--scaling", choices=("multiplicity", "deluxe"), default=None)
    p.add_argument("--condensed-bc", choices=("natural", "dirichlet"), default="natural")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptdd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve one configuration and report")
    _common(run)
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--rtol", type=float, default=1e-10)
    run.add_argument("--maxit", type=int, default=1000)
    spectra = sub.add_parser("spectra", help="dump face/edge eigenvalues as CSV")
    _common(spectra)
    return parser


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(dim=args.dim, N=args.n, m=args.hh, method=args.method,
                            coeff=args.coeff, tol_face=args.tol_face, tol_edge=args.tol_edge,
                            eta=args.eta, scaling=args.scaling, condensed_bc=args.condensed_bc,
                            rtol=getattr(args, "rtol", 1e-10), maxit=getattr(args, "maxit", 1000))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    if args.command == "spectra":
        text = dump_spectra(cfg, args.out)
        if args.out is None:
            sys.stdout.write(text)
        return EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        report = run_experiment(cfg)
    text = emit_report(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    if not report.bound_ok:
        print(f"bound violated: kappa={report.kappa:.4g} > C*tol="
              f"{report.bound_constant * report.tol:.4g}", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
