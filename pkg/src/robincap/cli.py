"""Command-line entry point: ``robincap {regimes,curve,solve,verify,hscan}``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys

import numpy as np

from . import experiments as ex
from .config import ConfigError, load_config
from .fem import SolverError, robin_identity_check, solve
from .geometry import ContainmentViolation, NotStarShapedAboutCenter, perimeter, validate_pair
from .hfunction import derearranged_phi, h_scan, solution_ratio_phi
from .mesh import MeshError, build_annular_mesh
from .radial import ProblemParams, ball_lower_bound

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_NOT_CONVERGED = 4

log = logging.getLogger("robincap")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_regimes(args) -> int:
    params = ProblemParams(args.n, args.p, args.beta)
    rep, row = ex.regimes_row(params)
    print(f"regime            {rep.regime.value}", file=sys.stderr)
    print(f"alpha             {rep.alpha:.10g}", file=sys.stderr)
    print(f"beta1, beta2      {rep.beta1:.10g}, {rep.beta2:.10g}", file=sys.stderr)
    if rep.critical_radius is not None:
        print(f"critical radius   {rep.critical_radius:.12g}", file=sys.stderr)
    print(f"limit R->inf      {rep.limit_at_infinity:.10g}", file=sys.stderr)
    if rep.balls_pair_is_unit:
        print("minimizer is always given by the pair (B_1,B_1)", file=sys.stderr)
    with _output(args.out) as fh:
        ex.write_csv(fh, ex.REGIME_HEADER, [row])
    return EXIT_OK


def cmd_curve(args) -> int:
    rows = ex.curve_rows(args.n, args.p, _floats(args.beta), args.r_min, args.r_max, args.samples)
    with _output(args.out) as fh:
        ex.write_csv(fh, ex.CURVE_HEADER, rows)
    return EXIT_OK


def _load_pair(path):
    cfg = load_config(path)
    pair = validate_pair(cfg.K, cfg.Omega)
    return cfg, pair


def cmd_solve(args) -> int:
    try:
        cfg, pair = _load_pair(args.config)
    except (ConfigError, ContainmentViolation, NotStarShapedAboutCenter, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    params = cfg.params
    n_theta = args.mesh_theta or cfg.n_theta
    n_radial = args.mesh_radial or cfg.n_radial
    if pair.degenerate:
        e = params.beta * perimeter(pair.Omega)
        print(f"K = Omega: energy = beta * perimeter = {e:.17g}")
        if args.out:
            with _output(args.out) as fh:
                ex.write_csv(fh, ["x", "y", "u"], [])
        return EXIT_OK
    try:
        mesh = build_annular_mesh(pair, n_theta, n_radial)
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    try:
        sol = solve(mesh, params)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    lhs, rhs = robin_identity_check(sol, params)
    print(f"mesh              {len(mesh.nodes)} nodes, {len(mesh.triangles)} triangles, h = {mesh.h:.6g}")
    print(f"energy            {sol.energy_total:.17g}")
    print(f"  gradient part   {sol.energy_gradient_part:.17g}")
    print(f"  boundary part   {sol.energy_boundary_part:.17g}")
    print(f"robin flux        {rhs:.17g}")
    print(f"identity gap      {abs(lhs - rhs) / lhs:.3e}")
    print(f"iterations        {sol.iterations}  converged={sol.converged}")
    status = "ok" if sol.converged else "unconverged"
    if args.out:
        with _output(args.out) as fh:
            rows = [[x, y, u] for (x, y), u in zip(mesh.nodes, sol.values)]
            ex.write_csv(fh, ["x", "y", "u"], rows, status=status)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_verify(args) -> int:
    params = ProblemParams(args.n, args.p, args.beta)
    M = args.M if args.M is not None else 4.0 * math.pi
    if not ex.theorem_hypothesis_holds(params):
        print("warning: theorem hypothesis violated; campaign runs as exploration", file=sys.stderr)
    report = ex.run_campaign(params, M, args.count, args.seed, args.amplitude, args.mesh_theta or 256, args.mesh_radial or 32)
    with _output(args.out) as fh:
        ex.write_csv(fh, ex.CAMPAIGN_HEADER, [r.row() for r in report.records], footer=report.footer())
    print(f"instances={len(report.records)} violations={report.violations} failures={report.failures} "
          f"min_relative_margin={report.min_margin:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_hscan(args) -> int:
    try:
        cfg, pair = _load_pair(args.config)
    except (ConfigError, ContainmentViolation, NotStarShapedAboutCenter, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    params = cfg.params
    try:
        mesh = build_annular_mesh(pair, args.mesh_theta or cfg.n_theta, args.mesh_radial or cfg.n_radial)
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    sol = solve(mesh, params)
    mode = args.phi
    if mode == "solution_ratio":
        phi, level = solution_ratio_phi(sol)
    elif mode.startswith("constant:"):
        c = float(mode.split(":", 1)[1])
        phi, level = np.full(len(mesh.triangles), c), None
    elif mode == "derearranged":
        R_ref = ex.reference_radius(params, cfg.M)
        phi, level = derearranged_phi(sol, params, R_ref)
        print(f"reference radius  {R_ref:.12g}", file=sys.stderr)
    else:
        print(f"unknown phi mode {mode!r}", file=sys.stderr)
        return EXIT_CONFIG
    scan = h_scan(sol, params, phi, level)
    h_min = min(h.h_value for h in scan)
    bound, _ = ball_lower_bound(params, max(cfg.M, params.omega))
    print(f"energy            {sol.energy_total:.17g}", file=sys.stderr)
    print(f"min_t H           {h_min:.17g}", file=sys.stderr)
    print(f"ball bound        {bound:.17g}", file=sys.stderr)
    rows = [[h.t, h.h_value, *h.parts] for h in scan]
    status = "ok" if sol.converged else "unconverged"
    with _output(args.out) as fh:
        ex.write_csv(fh, ["t", "H", "internal", "area_term", "external"], rows, status=status,
                     footer=[f"energy={ex.fmt(sol.energy_total)}", f"min_H={ex.fmt(h_min)}"])
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robincap", description="Robin p-capacity of star-shaped pairs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, n_default=3):
        sp.add_argument("--n", type=int, default=n_default)
        sp.add_argument("--p", type=float, required=True)
        sp.add_argument("--out", default=None, help="CSV output path (default stdout)")

    sp = sub.add_parser("regimes", help="classify R -> E(B_1, B_R)")
    common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.set_defaults(func=cmd_regimes)

    sp = sub.add_parser("curve", help="ball energy curves, one per beta")
    common(sp)
    sp.add_argument("--beta", required=True, help="comma-separated list")
    sp.add_argument("--r-min", type=float, default=1.0)
    sp.add_argument("--r-max", type=float, default=10.0)
    sp.add_argument("--samples", type=int, default=200)
    sp.set_defaults(func=cmd_curve)

    for name, func, helptext in (("solve", cmd_solve, "solve one configured pair"),
                                 ("hscan", cmd_hscan, "scan H(t, phi) on a configured pair")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        sp.add_argument("--mesh-theta", type=int, default=None)
        sp.add_argument("--mesh-radial", type=int, default=None)
        sp.add_argument("--out", default=None)
        if name == "hscan":
            sp.add_argument("--phi", default="solution_ratio",
                            help="solution_ratio | constant:<c> | derearranged")
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="random-pair campaign against the ball bound")
    common(sp, n_default=2)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--M", type=float, default=None, help="volume bound (default 4*pi)")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--amplitude", type=float, default=0.15)
    sp.add_argument("--mesh-theta", type=int, default=None)
    sp.add_argument("--mesh-radial", type=int, default=None)
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
