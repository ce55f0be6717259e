"""Command-line front end.

Exit codes: 0 on success, 1 on usage or input errors, 2 when a solver did
not converge (artifacts are still written and flagged).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import builtin_field, case1_reference, case2_reference, case3_reference
from .envelope import cone_representation_error, lower_envelope, upper_envelope
from .errors import LipApproxError
from .grid import ScalarField
from .io import field_to_csv, field_to_json, read_field
from .lip1d import project_lip_1d
from .plap import p_sweep
from .projector import Certificate, chain_multipliers, kkt_residual, project_lip_graph
from .sbv1d import minimize_sbv_1d
from .viscosity import (
    boundary_condition_check,
    combined_residual,
    double_inequality_check,
    eikonal_residual,
    regions,
)

COMMANDS = ("project", "plap-sweep", "envelope", "verify", "sbv1d", "examples")
CASES = {"1": "case1", "2": "case2", "3": "case3", "radial": "radial",
         "case1": "case1", "case2": "case2", "case3": "case3"}
REFERENCES = {"case2": case2_reference, "case3": case3_reference}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> Parser:
    common = Parser(add_help=False)
    d = common.add_argument_group("datum")
    d.add_argument("--case", help="builtin datum: 1, 2, 3 or radial")
    d.add_argument("--input", help="datum file (.csv for 1D, .json for any grid)")
    d.add_argument("--n", type=int, default=None, help="nodes per axis (default 2001 in 1D, 81 for radial)")
    d.add_argument("--extent", type=_floats, default=None, help="lo,hi (default -1,1)")
    d.add_argument("--mask", default=None, help="radial only: disk radius as 'disk:R'")
    d.add_argument("--k", type=float, default=1.0, help="indicator height")
    d.add_argument("--r0", type=float, default=0.4, help="indicator half-width or radius")
    s = common.add_argument_group("solver")
    s.add_argument("--tol-feas", type=float, default=None)
    s.add_argument("--tol-inc", type=float, default=None)
    s.add_argument("--max-iter", type=int, default=None)
    s.add_argument("--tau", type=float, default=None, help="region threshold (default max(1e-6, h))")
    s.add_argument("--method", choices=("dp", "dykstra"), default=None,
                   help="projection solver (default: dp in 1D, dykstra in 2D)")
    o = common.add_argument_group("output")
    o.add_argument("--out", default=".", help="output directory")
    o.add_argument("--format", choices=("csv", "json"), default="csv", help="field format")
    o.add_argument("-v", "--verbose", action="store_true")

    p = Parser(prog="lipapprox", description="Lipschitz projections and their limit equations")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)
    sub.add_parser("project", parents=[common], help="L2 projection onto 1-Lipschitz fields")
    sw = sub.add_parser("plap-sweep", parents=[common], help="finite-p solves for increasing p")
    sw.add_argument("--ps", type=_floats, default=[4, 8, 16, 32, 64])
    sw.add_argument("--p", type=float, default=None, help="single exponent (overrides --ps)")
    sw.add_argument("--cold", action="store_true", help="cold start every p")
    sub.add_parser("envelope", parents=[common], help="upper and lower 1-Lipschitz envelopes")
    sub.add_parser("verify", parents=[common], help="project and check the limit equations")
    sb = sub.add_parser("sbv1d", parents=[common], help="fidelity plus jump count in 1D")
    sb.add_argument("--rexp", type=int, default=2, choices=(1, 2))
    sb.add_argument("--penalty", type=float, default=1.0)
    sub.add_parser("examples", parents=[common], help="worked examples with reference curves")
    return p


def _argv_record(argv) -> list:
    """Command line without the output directory, so artifacts do not depend on it."""
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


class Run:
    def __init__(self, args, argv):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.prov = {"command": ["lipapprox", *_argv_record(argv)], "version": __version__}
        self.flagged = False

    def datum(self) -> tuple[str, ScalarField]:
        a = self.args
        if (a.case is None) == (a.input is None):
            raise UsageError("give exactly one of --case or --input")
        if a.input is not None:
            return "input", read_field(a.input)
        name = CASES.get(a.case)
        if name is None:
            raise UsageError(f"unknown case {a.case!r}; choose 1, 2, 3 or radial")
        kw = {"k": a.k, "r0": a.r0}
        if name == "radial":
            n = a.n or 81
            if a.mask:
                if not a.mask.startswith("disk:"):
                    raise UsageError("--mask for radial must be 'disk:R'")
                kw["radius"] = float(a.mask.split(":", 1)[1])
        else:
            n = a.n or 2001
            if a.mask not in (None, "full"):
                raise UsageError("1D builtins only support --mask full")
            if a.extent:
                if len(a.extent) != 2:
                    raise UsageError("--extent needs lo,hi")
                kw["extent"] = tuple(a.extent)
        return name, builtin_field(name, n, **kw)

    def header(self, field: ScalarField | None = None, **extra) -> dict:
        out = dict(self.prov)
        if field is not None:
            out["grid"] = field.grid.describe()
        out.update(extra)
        return out

    def write_field(self, stem: str, field: ScalarField, **extra) -> None:
        fmt = self.args.format
        head = self.header(field, **extra)
        text = field_to_json(field, head) if fmt == "json" else field_to_csv(field, head)
        (self.out / f"{stem}.{fmt}").write_text(text)

    def write_json(self, name: str, payload: dict, field: ScalarField | None = None) -> None:
        doc = {"provenance": self.header(field), **payload}
        (self.out / name).write_text(json.dumps(doc, sort_keys=True, indent=1, default=_plain) + "\n")

    def write_text(self, name: str, body: str, field: ScalarField | None = None) -> None:
        line = "# " + json.dumps(self.header(field), sort_keys=True) + "\n"
        (self.out / name).write_text(line + body)

    def project(self, f: ScalarField):
        a = self.args
        method = a.method or ("dp" if f.grid.dim == 1 else "dykstra")
        if method == "dp":
            if f.grid.dim != 1:
                raise UsageError("--method dp needs a 1D datum")
            u = project_lip_1d(f)
            cert = kkt_residual(u, f, multipliers=chain_multipliers(u, f), check_feasible=False)
            cert = Certificate(0, cert.feasibility, 0.0, cert.kkt, cert.slack, True)
        else:
            kw = {}
            if a.tol_feas is not None:
                kw["tol_feas"] = a.tol_feas
            if a.tol_inc is not None:
                kw["tol_inc"] = a.tol_inc
            if a.max_iter is not None:
                kw["max_iter"] = a.max_iter
            u, cert = project_lip_graph(f, **kw)
        if not cert.converged:
            self.flagged = True
        return u, {"method": method, **cert.to_dict()}


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _verification(run: Run, u: ScalarField, f: ScalarField) -> tuple[dict, dict]:
    rep = regions(u, f, run.args.tau)
    eik = eikonal_residual(u, rep)
    comb = combined_residual(u, rep)
    bc = boundary_condition_check(u, f, rep)
    cones = {}
    for name, sign in (("plus", 1), ("minus", -1)):
        err, size = cone_representation_error(u, f, sign, run.args.tau)
        cones[name] = {"error": err, "size": size}
    residuals = {
        "eikonal": {"plus": eik["plus"], "minus": eik["minus"]},
        "combined": {k: comb[k] for k in ("plus", "minus", "plus_excess", "minus_excess")},
        "boundary": bc.to_dict(),
        "cone_representation": cones,
        "slope": double_inequality_check(u),
        "h": u.grid.hmax,
    }
    summary = rep.summary()
    summary.pop("residuals")
    return summary, residuals


def cmd_project(run: Run):
    _, f = run.datum()
    u, cert = run.project(f)
    run.write_field("u", u, solver=cert)
    run.write_json("certificate.json", cert, f)


def cmd_plap_sweep(run: Run):
    a = run.args
    _, f = run.datum()
    ps = [a.p] if a.p is not None else a.ps
    kw = {} if a.max_iter is None else {"max_iter": a.max_iter}
    rep = p_sweep(f, ps, warm=not a.cold, **kw)
    if not all(r.converged for r in rep.rows):
        run.flagged = True
    run.write_text("sweep.csv", rep.to_csv(), f)
    run.write_json("estimates.json", {"checks": rep.check_estimates()}, f)


def cmd_envelope(run: Run):
    _, f = run.datum()
    run.write_field("upper", upper_envelope(f))
    run.write_field("lower", lower_envelope(f))


def cmd_verify(run: Run):
    _, f = run.datum()
    u, cert = run.project(f)
    summary, residuals = _verification(run, u, f)
    run.write_field("u", u, solver=cert)
    run.write_json("regions.json", summary, f)
    run.write_json("residuals.json", {"solver": cert, **residuals}, f)


def cmd_sbv1d(run: Run):
    a = run.args
    _, f = run.datum()
    if f.grid.dim != 1:
        raise UsageError("sbv1d needs a 1D datum")
    sol = minimize_sbv_1d(f, a.rexp, a.penalty)
    run.write_json("jumps.json", sol.to_dict(), f)
    run.write_text("segments.csv", sol.segments_csv(), f)


def cmd_examples(run: Run):
    name, f = run.datum()
    u, cert = run.project(f)
    run.write_field("f", f)
    run.write_field("u", u, solver=cert)
    summary, residuals = _verification(run, u, f)
    if name in REFERENCES or name == "case1":
        x = f.x
        ref = case1_reference(x, run.args.k, run.args.r0) if name == "case1" else REFERENCES[name](x)
        run.write_field("reference", f.with_values(ref))
        residuals["reference_linf"] = float(np.max(np.abs(u.values - ref)))
    run.write_json("regions.json", summary, f)
    run.write_json("residuals.json", {"solver": cert, **residuals}, f)


HANDLERS = {
    "project": cmd_project,
    "plap-sweep": cmd_plap_sweep,
    "envelope": cmd_envelope,
    "verify": cmd_verify,
    "sbv1d": cmd_sbv1d,
    "examples": cmd_examples,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args, argv)
        HANDLERS[args.command](run)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lipapprox: error: {exc}", file=sys.stderr)
        return 1
    except (LipApproxError, ValueError, OSError) as exc:
        print(f"lipapprox: error: {exc}", file=sys.stderr)
        return 1
    if run.flagged:
        print("lipapprox: solver did not converge; artifacts flagged", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
