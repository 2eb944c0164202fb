"""Command-line front end.

Subcommands: ``check`` (validate + classify), ``solve`` (minimize and
write artifacts), ``map`` (inspect the sphere map), ``scenario`` (list or
export builtins), ``energy`` (evaluate a weight file).  Exit codes:
0 ok, 2 invalid input, 3 non-convergence.  ``VEP_THREADS`` caps the
kernel-assembly thread pool (values never depend on it).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as vio
from .compactify import discretize, vector_energy
from .errors import VequilibError
from .geometry import chordal_distance, map_point
from .grids import density_to_plane, grid_to_csv, sphere_image
from .problem import (
    BOUNDED,
    STRONG,
    WEAK,
    classify_admissibility,
    validate_spec,
)
from .qp import SolveOptions, assemble, kkt_residual, solve
from .scenarios import builtin_names, load_builtin


def _parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError:
            params[k] = v
    return params


def _load_spec(source: str, params):
    if Path(source).is_file():
        return vio.load_problem(source)
    return load_builtin(source, **_parse_params(params))


def _emit(obj) -> None:
    sys.stdout.write(vio.dumps17(obj) + "\n")


def _error_payload(exc: Exception) -> dict:
    code = getattr(exc, "code", type(exc).__name__)
    return {"valid": False, "error": code, "message": str(exc)}


def _report_dict(validated, report) -> dict:
    return {
        "valid": True,
        "class": report.overall,
        "coupled_masses": [float(v) for v in validated.cm],
        "components": [
            {"index": c.index, "class": c.cls, "liminf": c.liminf}
            for c in report.components
        ],
        "masses": validated.spec.masses.values.tolist(),
        "d": validated.d,
    }


def cmd_check(args) -> int:
    try:
        spec = _load_spec(args.source, args.param)
        validated = validate_spec(spec)
        report = classify_admissibility(validated)
    except (VequilibError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        _emit(_error_payload(exc))
        return 2
    _emit(_report_dict(validated, report))
    return 0 if report.overall in (BOUNDED, STRONG, WEAK) else 2


def cmd_solve(args) -> int:
    try:
        spec = _load_spec(args.source, args.param)
        validated = validate_spec(spec)
        report = classify_admissibility(validated)
        problem = discretize(validated, cells=args.cells, pole_clearance=args.pole_clearance)
        qp = assemble(problem)
    except (VequilibError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        _emit(_error_payload(exc))
        return 2
    sol = solve(qp, SolveOptions(tol=args.tol, max_iter=args.max_iter, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "energy": sol.energy,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "class": report.overall,
        "coupled_masses": [float(v) for v in validated.cm],
        "component_masses": [float(np.sum(w)) for w in sol.weights],
        "multipliers": list(sol.multipliers),
        "cells": args.cells,
        "pole_clearance": args.pole_clearance,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": sol.seed,
    }
    if args.pole_check:
        half = discretize(validated, cells=args.cells, pole_clearance=args.pole_clearance / 2.0)
        sol_half = solve(assemble(half),
                         SolveOptions(tol=args.tol, max_iter=args.max_iter, seed=args.seed))
        summary["pole_check"] = {
            "pole_clearance": args.pole_clearance / 2.0,
            "energy": sol_half.energy,
            "energy_delta": sol_half.energy - sol.energy,
        }
    (out / "summary.json").write_text(vio.dumps17(summary) + "\n")
    for i, grid in enumerate(problem.grids):
        (out / f"grid_{i}.csv").write_text(grid_to_csv(grid))
        pts, dens = density_to_plane(sol.weights[i], grid)
        lines = ["x_re,x_im,density,sphere_weight"]
        for k in range(grid.n):
            lines.append(",".join(f"{v:.17g}" for v in
                                  (pts[k].real, pts[k].imag, dens[k], sol.weights[i][k])))
        (out / f"density_{i}.csv").write_text("\n".join(lines) + "\n")
    _emit(summary)
    return 0 if sol.converged else 3


def cmd_map(args) -> int:
    text = args.point.strip().lower()
    try:
        z = complex("inf") if text in ("inf", "infinity") else complex(text.replace("i", "j"))
    except ValueError:
        _emit({"valid": False, "error": "ParseError", "message": f"cannot parse {args.point!r}"})
        return 2
    point = map_point(z)
    _emit({
        "point": [float(np.real(z)) if np.isfinite(z) else "inf",
                  float(np.imag(z)) if np.isfinite(z) else 0.0],
        "sphere": point.tolist(),
        "pole_distance": float(chordal_distance(z, complex("inf"))),
    })
    return 0


def cmd_scenario(args) -> int:
    if args.list or args.name is None:
        _emit({"builtins": builtin_names()})
        return 0
    try:
        spec = load_builtin(args.name, **_parse_params(args.param))
        doc = vio.spec_to_dict(spec)
    except (VequilibError, ValueError) as exc:
        _emit(_error_payload(exc))
        return 2
    if args.output:
        Path(args.output).write_text(vio.dumps17(doc) + "\n")
    else:
        _emit(doc)
    return 0


def cmd_energy(args) -> int:
    try:
        spec = _load_spec(args.source, args.param)
        validated = validate_spec(spec)
        problem = discretize(validated, cells=args.cells, pole_clearance=args.pole_clearance)
        doc = json.loads(Path(args.weights).read_text())
        weights = [np.asarray(w, dtype=float) for w in doc["weights"]]
        value = vector_energy(problem, weights)
        qp = assemble(problem)
        res = kkt_residual(qp, weights)
    except (VequilibError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        _emit(_error_payload(exc))
        return 2
    _emit({"energy": value if np.isfinite(value) else "inf", "kkt_residual": res})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vequilib",
        description="Vector equilibrium measures via compactification onto the sphere.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p, with_solver=True):
        p.add_argument("source", help="problem JSON file or builtin scenario name")
        p.add_argument("--param", action="append", metavar="K=V",
                       help="builtin scenario parameter (repeatable)")
        p.add_argument("--cells", type=int, default=200, help="cells per component")
        p.add_argument("--pole-clearance", type=float, default=1e-3)
        if with_solver:
            p.add_argument("--tol", type=float, default=1e-8)
            p.add_argument("--max-iter", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=None)

    p_check = sub.add_parser("check", help="validate and classify a problem")
    p_check.add_argument("source")
    p_check.add_argument("--param", action="append", metavar="K=V")
    p_check.set_defaults(func=cmd_check)

    p_solve = sub.add_parser("solve", help="minimize and write artifacts")
    add_run_args(p_solve)
    p_solve.add_argument("--out", default="vep_out", help="output directory")
    p_solve.add_argument("--pole-check", action="store_true",
                         help="re-solve at half the pole clearance and report the energy shift")
    p_solve.set_defaults(func=cmd_solve)

    p_map = sub.add_parser("map", help="map a plane point onto the sphere")
    p_map.add_argument("point", help='complex number like "1+2i", or "inf"')
    p_map.set_defaults(func=cmd_map)

    p_scen = sub.add_parser("scenario", help="list builtins or export one as JSON")
    p_scen.add_argument("name", nargs="?")
    p_scen.add_argument("--list", action="store_true")
    p_scen.add_argument("--param", action="append", metavar="K=V")
    p_scen.add_argument("-o", "--output")
    p_scen.set_defaults(func=cmd_scenario)

    p_energy = sub.add_parser("energy", help="evaluate the energy of a weight file")
    add_run_args(p_energy, with_solver=False)
    p_energy.add_argument("--weights", required=True,
                          help='JSON file {"weights": [[...], ...]} on the full grids')
    p_energy.set_defaults(func=cmd_energy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "cells", 8) < 8:
        _emit({"valid": False, "error": "BadParams", "message": "--cells must be >= 8"})
        return 2
    if getattr(args, "tol", 1.0) <= 0:
        _emit({"valid": False, "error": "BadParams", "message": "--tol must be positive"})
        return 2
    return args.func(args)


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
