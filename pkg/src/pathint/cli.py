"""Command-line front end.

Every command writes its numeric output as CSV plus a JSON manifest into
``--out``. Exit codes: 0 success, 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .model import ConfigError, CriticalDistance, FixedEnergy, StochasticBaseline, load_problem

MODES = ("critical", "fixed-energy", "baseline")


class UsageError(Exception):
    pass


def _parse_points(text: str, m: int) -> np.ndarray:
    text = text.strip()
    if text.startswith("linspace:"):
        try:
            _, a, b, k = text.split(":")
            return np.linspace(float(a), float(b), int(k)).reshape(-1, 1)
        except ValueError:
            raise UsageError(f"bad linspace spec {text!r}; expected linspace:a:b:k") from None
    try:
        if ";" in text or m > 1:
            rows = [[float(v) for v in p.split(",")] for p in text.split(";") if p.strip()]
        else:
            rows = [[float(v)] for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse points {text!r}") from None
    pts = np.array(rows, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != m:
        raise UsageError(f"points must have dimension {m}")
    return pts


def _load(args):
    if not args.config:
        raise UsageError("--config is required")
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    problem = load_problem(path)
    if getattr(args, "mode", None):
        problem = problem.replace(exit_strategy=_strategy(args.mode, problem))
    return problem


def _strategy(mode: str, problem):
    cfg = (problem.config or {}).get("exit_strategy") or {}
    params = cfg.get("params", {}) if isinstance(cfg, dict) else {}
    if mode == "critical":
        return CriticalDistance(float(params.get("speed", 1.0)))
    if mode == "fixed-energy":
        return FixedEnergy(float(params.get("energy", math.pi)))
    return StochasticBaseline()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, command: str, outputs: list[str], started: float, extra: dict | None = None) -> dict:
    return {
        "command": command,
        "argv": sys.argv[1:],
        "config": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "samples": getattr(args, "samples", None),
        "workers": getattr(args, "workers", None),
        "mode": getattr(args, "mode", None),
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - started,
        "outputs": outputs,
        **(extra or {}),
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_integrator_suite(args) -> int:
    from .suite import run_suite

    started = time.perf_counter()
    only = [s.strip() for s in args.only.split(",")] if args.only else None
    try:
        checks = run_suite(only, fault=1.0 if args.inject_fault else 0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.family:<9} {c.name:<32} residual={c.residual:.3e} tol={c.tolerance:.0e}")
    out = _out_dir(args)
    report = {"checks": [c.to_dict() for c in checks], "passed": not failed, "count": len(checks)}
    _write_json(out / "integrator_suite.json", report)
    _write_json(out / "manifest.json", _manifest(args, "integrator-suite", ["integrator_suite.json"], started))
    return 1 if failed else 0


def cmd_solve(args) -> int:
    from .solve import solve_dirichlet, write_solution_csv

    started = time.perf_counter()
    problem = _load(args)
    pts = _parse_points(args.points, problem.dimension)
    field = solve_dirichlet(problem, pts, args.samples, seed=args.seed, workers=args.workers)
    out = _out_dir(args)
    write_solution_csv(field, out / "solution.csv")
    _write_json(out / "solution.json", field.to_dict())
    _write_json(
        out / "manifest.json",
        _manifest(args, "solve", ["solution.csv", "solution.json"], started, {"problem_hash": field.problem_hash}),
    )
    return 0


def cmd_exit_profile(args) -> int:
    from .critical import exit_time

    started = time.perf_counter()
    problem = _load(args)
    if isinstance(problem.exit_strategy, StochasticBaseline):
        raise UsageError("exit-profile needs --mode critical or fixed-energy")
    pts = _parse_points(args.points, problem.dimension)
    out = _out_dir(args)
    m = problem.dimension
    rows = []
    for x in pts:
        prof = exit_time(problem, x)
        rows.append(
            [*map(repr, map(float, x)), repr(prof.tau), *map(repr, map(float, prof.exit_point)), repr(prof.transversality), repr(prof.energy), len(prof.candidates)]
        )
    header = [f"x{i + 1}" for i in range(m)] + ["tau"] + [f"sigma{i + 1}" for i in range(m)] + ["transversality", "energy_residual", "candidates"]
    _write_csv(out / "exit_profile.csv", header, rows)
    _write_json(out / "manifest.json", _manifest(args, "exit-profile", ["exit_profile.csv"], started))
    return 0


def cmd_kernel(args) -> int:
    from . import kernels as K

    started = time.perf_counter()
    problem = _load(args)
    out = _out_dir(args)
    if args.kind == "density":
        if not args.edges:
            raise UsageError("--edges a:b:k is required for the density kernel")
        edges = []
        for spec in args.edges.split(";"):
            try:
                a, b, k = spec.split(":")
                edges.append(np.linspace(float(a), float(b), int(k) + 1))
            except ValueError:
                raise UsageError(f"bad edges spec {spec!r}") from None
        x = _parse_points(args.points, problem.dimension)[0]
        grid = K.kernel_density(problem, x, edges, args.samples, seed=args.seed, workers=args.workers)
        K.write_grid_csv(grid, out / "kernel_density.csv")
        extra = {"total_mass": grid.total_mass, "outside_mass": grid.outside_mass, "empty_bins": grid.empty_bins}
        _write_json(out / "manifest.json", _manifest(args, "kernel", ["kernel_density.csv"], started, extra))
        return 0
    fn = {
        "dirichlet": K.dirichlet_apply,
        "boundary": K.dirichlet_boundary_apply,
        "k-infinity": K.k_infinity_apply,
        "f-u": K.f_U_apply,
        "neumann": K.neumann_apply,
    }[args.kind]
    pts = _parse_points(args.points, problem.dimension)
    rows = []
    for i, x in enumerate(pts):
        est = fn(problem, x, args.samples, seed=args.seed + i, workers=args.workers)
        rows.append([*map(repr, map(float, x)), repr(float(est.value)), repr(float(est.stderr))])
    header = [f"x{i + 1}" for i in range(problem.dimension)] + ["value", "stderr"]
    _write_csv(out / "kernel.csv", header, rows)
    _write_json(out / "manifest.json", _manifest(args, "kernel", ["kernel.csv"], started, {"kind": args.kind}))
    return 0


def cmd_eigen(args) -> int:
    from .solve import eigen_dirichlet

    started = time.perf_counter()
    problem = _load(args) if args.config else None
    res = eigen_dirichlet(problem, q=args.nodes, k=args.k, n=args.samples, seed=args.seed)
    out = _out_dir(args)
    _write_csv(out / "eigenvalues.csv", ["index", "eigenvalue"], [[i + 1, repr(float(v))] for i, v in enumerate(res.eigenvalues)])
    _write_json(out / "eigen.json", {"eigenvalues": res.eigenvalues, "nodes": res.nodes, "source": res.source})
    _write_json(out / "manifest.json", _manifest(args, "eigen", ["eigenvalues.csv", "eigen.json"], started))
    return 0


def cmd_residual_report(args) -> int:
    from .solve import exploratory_residual_report

    started = time.perf_counter()
    if not args.config:
        raise UsageError("--config is required")
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    report = exploratory_residual_report(json.loads(path.read_text()), n=args.samples, seed=args.seed)
    out = _out_dir(args)
    _write_json(out / "residual_report.json", report)
    _write_csv(
        out / "residual_report.csv",
        ["mode", "speed", "max_abs_residual", "median_abs_residual"],
        [[r["mode"], repr(r["speed"]), repr(r["max_abs_residual"]), repr(r["median_abs_residual"])] for r in report["rows"]],
    )
    _write_json(out / "manifest.json", _manifest(args, "residual-report", ["residual_report.json", "residual_report.csv"], started))
    return 0


def _write_csv(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathint", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, samples=20_000, mode=True):
        sp.add_argument("--config", help="problem configuration (JSON)")
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--workers", type=_positive, default=os.cpu_count() or 1)
        sp.add_argument("--samples", type=_positive, default=samples)
        if mode:
            sp.add_argument("--mode", choices=MODES)
        sp.add_argument("--out", default="pathint-out")

    s = sub.add_parser("integrator-suite", help="run the integrator property checks")
    s.add_argument("--only", help="comma-separated families: gaussian,dirac,hermite,gamma")
    s.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    s.add_argument("--out", default="pathint-out")
    s.set_defaults(func=cmd_integrator_suite)

    s = sub.add_parser("solve", help="assemble the Dirichlet solution at points")
    common(s)
    s.add_argument("--points", required=True, help="e.g. 0.1,0.5 (1-D) or 0.1,0.2;0.3,0.4 or linspace:a:b:k")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("exit-profile", help="critical exit times and exit points")
    common(s)
    s.add_argument("--points", required=True)
    s.set_defaults(func=cmd_exit_profile)

    s = sub.add_parser("kernel", help="apply a kernel functional or bin the Dirichlet kernel")
    common(s)
    s.add_argument("--kind", choices=("dirichlet", "boundary", "k-infinity", "f-u", "neumann", "density"), default="dirichlet")
    s.add_argument("--points", required=True)
    s.add_argument("--edges", help="bin edges per coordinate, a:b:bins separated by ';'")
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("eigen", help="Fredholm eigenvalues by Nystrom discretization")
    common(s, samples=5000, mode=False)
    s.add_argument("--nodes", type=int, default=64)
    s.add_argument("--k", type=int, default=5)
    s.set_defaults(func=cmd_eigen)

    s = sub.add_parser("residual-report", help="exploratory operator residuals across exit strategies")
    common(s, samples=2000, mode=False)
    s.set_defaults(func=cmd_residual_report)
    return p


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"pathint: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"pathint: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
