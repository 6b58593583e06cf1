"""Solution assembly, mean exit times, operator residuals and Fredholm eigenvalues."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .critical import exit_time
from .kernels import (
    NEUMANN_DOMAINS,
    KernelEstimate,
    dirichlet_apply,
    dirichlet_boundary_apply,
    neumann_apply,
    neumann_boundary_apply,
)
from .model import CriticalDistance, FixedEnergy, ProblemSpec, StochasticBaseline

__all__ = [
    "SolutionField",
    "EigenResult",
    "ResidualGrid",
    "solve_dirichlet",
    "solve_neumann",
    "mean_exit_time",
    "operator_residual",
    "eigen_dirichlet",
    "interval_green",
    "exploratory_residual_report",
    "write_solution_csv",
    "MIN_NYSTROM_NODES",
]

MIN_NYSTROM_NODES = 16


@dataclass(eq=False)
class SolutionField:
    points: np.ndarray  # (k, m)
    values: np.ndarray
    stderr: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    on_boundary: np.ndarray
    problem_hash: str
    seed: int
    mode: str
    candidates: list | None = None  # per point, one (value, stderr) per alternative critical exit
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "problem_hash": self.problem_hash,
            "seed": self.seed,
            "mode": self.mode,
            "points": self.points.tolist(),
            "values": self.values.tolist(),
            "stderr": self.stderr.tolist(),
            "interior": self.interior.tolist(),
            "boundary": self.boundary.tolist(),
            "meta": self.meta,
        }
        if self.candidates is not None:
            out["candidates"] = self.candidates
        return out


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    nodes: int
    source: str  # "analytic" or "estimated"


@dataclass(frozen=True, eq=False)
class ResidualGrid:
    points: np.ndarray
    residual: np.ndarray  # L Psi + f at interior grid points
    stderr: np.ndarray
    max_abs: float
    median_abs: float


def _mode_name(strategy) -> str:
    if isinstance(strategy, StochasticBaseline):
        return "baseline"
    if isinstance(strategy, FixedEnergy):
        return "fixed-energy"
    return "critical"


def _points(problem, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, problem.dimension) if problem.dimension > 1 else pts.reshape(-1, 1)
    if pts.shape[1] != problem.dimension:
        raise ValueError("evaluation points do not match the problem dimension")
    return pts


def solve_dirichlet(
    problem: ProblemSpec,
    points,
    n: int,
    seed: int = 0,
    all_candidates: bool = False,
    dt: float | None = None,
    workers: int = 1,
) -> SolutionField:
    """Psi(x) = int K_U^(D) f + int K_d^(D) phi at each point; phi exactly on the boundary.

    Point i uses seed (seed, i), so results do not depend on the order in
    which points are processed. With ``all_candidates`` every alternative
    critical exit (e.g. the far endpoint of an interval) is solved and
    reported separately; no combination rule is applied.
    """
    pts = _points(problem, points)
    dom = problem.domain
    k = pts.shape[0]
    interior = np.zeros(k)
    boundary = np.zeros(k)
    se = np.zeros(k)
    on_b = np.zeros(k, dtype=bool)
    cands = [] if all_candidates else None
    for i, x in enumerate(pts):
        if dom.distance(x) > 1e-12:
            raise ValueError(f"point {x.tolist()} lies outside the domain")
        s_i = _point_seed(seed, i)
        if dom.has_boundary and abs(dom.distance(x)) <= 1e-12:
            on_b[i] = True
            boundary[i] = float(problem.boundary_data(x))
            if cands is not None:
                cands.append([])
            continue
        ki = dirichlet_apply(problem, x, n, seed=s_i, dt=dt, workers=workers)
        kb = dirichlet_boundary_apply(problem, x, n, seed=s_i, dt=dt, workers=workers)
        interior[i], boundary[i] = ki.value, kb.value
        se[i] = math.hypot(ki.stderr, kb.stderr)
        if cands is not None:
            cands.append(_candidate_solutions(problem, x, n, s_i, dt))
    return SolutionField(
        points=pts,
        values=interior + boundary,
        stderr=se,
        interior=interior,
        boundary=boundary,
        on_boundary=on_b,
        problem_hash=problem.fingerprint(),
        seed=seed,
        mode=_mode_name(problem.exit_strategy),
        candidates=cands,
    )


def _point_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(i),)).generate_state(1, np.uint64)[0] >> 1)


def _candidate_solutions(problem, x, n, seed, dt):
    """One solution per critical exit: the kernels depend on the exit only through tau."""
    if isinstance(problem.exit_strategy, StochasticBaseline):
        return []
    from .kernels import _gauss_legendre, _time_integral
    from .propagator import DEFAULT_DT, propagate

    prof = exit_time(problem, x)
    step = dt or DEFAULT_DT
    out = []
    for tau, p in prof.candidates:
        t_nodes, w_nodes = _gauss_legendre(0.0, tau, 32)
        v, var = _time_integral(problem, problem.source, x, t_nodes, w_nodes, n, seed, 0, step, 1)
        b = propagate(problem, problem.boundary_data, x, tau, n, seed=seed, stream=500_000, dt=step)
        out.append({"tau": tau, "exit_point": np.asarray(p).tolist(), "value": v + b.value, "stderr": math.hypot(math.sqrt(var), b.stderr)})
    return out


def solve_neumann(
    problem: ProblemSpec,
    points,
    n: int,
    seed: int = 0,
    psi=None,
    form: str = "direct",
    tail_tol: float = 1e-4,
    workers: int = 1,
) -> SolutionField:
    """Psi = int K^(N) f + int K_d^(N) psi, with psi the inward normal derivative
    data (defaults to the problem's boundary data). Determined up to a constant."""
    if problem.domain.shape not in NEUMANN_DOMAINS:
        raise ValueError(f"unsupported domain {problem.domain.shape!r} for Neumann problems")
    pts = _points(problem, points)
    psi = problem.boundary_data if psi is None else psi
    k = pts.shape[0]
    interior, boundary, se = np.zeros(k), np.zeros(k), np.zeros(k)
    on_b = np.array([abs(problem.domain.distance(x)) <= 1e-12 for x in pts])
    for i, x in enumerate(pts):
        s_i = _point_seed(seed, i)
        kn = neumann_apply(problem, x, n, seed=s_i, form=form, tail_tol=tail_tol, workers=workers)
        kb = neumann_boundary_apply(problem, x, psi, n, seed=s_i, workers=workers)
        interior[i], boundary[i] = kn.value, kb.value
        se[i] = math.hypot(kn.stderr, kb.stderr)
    return SolutionField(
        points=pts,
        values=interior + boundary,
        stderr=se,
        interior=interior,
        boundary=boundary,
        on_boundary=on_b,
        problem_hash=problem.fingerprint(),
        seed=seed,
        mode=_mode_name(problem.exit_strategy),
        meta={"additive_constant": "undetermined", "form": form, "tail_tol": tail_tol},
    )


def mean_exit_time(problem: ProblemSpec, x, n: int, seed: int = 0, dt: float | None = None, workers: int = 1) -> KernelEstimate:
    """Psi with f = 1 and phi = 0, i.e. the solution of L T = -1, T = 0 on the boundary."""
    spec = problem.replace(source=1.0, boundary_data=0.0)
    x = np.asarray(x, dtype=float).reshape(-1)
    if isinstance(spec.exit_strategy, StochasticBaseline):
        return dirichlet_apply(spec, x, n, seed=seed, dt=dt, workers=workers)
    if spec.potential.constant == 0.0:
        # U_t 1 = 1 exactly, so the kernel integral is tau itself
        tau = exit_time(spec, x).tau
        return KernelEstimate(tau, 0.0, None, {"mode": _mode_name(spec.exit_strategy), "tau": tau})
    return dirichlet_apply(spec, x, n, seed=seed, dt=dt, workers=workers)


def operator_residual(field: SolutionField, problem: ProblemSpec, spacing: float | None = None) -> ResidualGrid:
    """L Psi + f at interior nodes of a regular grid, by central differences.

    The field's points must form a regular tensor grid. Standard errors are
    propagated assuming independent point estimates.
    """
    pts = field.points
    m = pts.shape[1]
    axes = [np.unique(np.round(pts[:, i], 12)) for i in range(m)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != pts.shape[0]:
        raise ValueError("evaluation points do not form a regular grid")
    hs = []
    for a in axes:
        if len(a) < 3:
            raise ValueError("need at least 3 grid points per axis")
        d = np.diff(a)
        if not np.allclose(d, d[0], rtol=1e-9):
            raise ValueError("grid spacing must be uniform")
        hs.append(float(d[0]))
    size = problem.domain.extent
    if math.isfinite(size) and max(hs) > size / 8 + 1e-12:
        raise ValueError("grid too coarse: spacing exceeds domain size / 8")
    order = np.lexsort(tuple(pts[:, i] for i in reversed(range(m))))
    vals = field.values[order].reshape(shape)
    ses = field.stderr[order].reshape(shape)
    grid_pts = pts[order].reshape(shape + (m,))
    inner = tuple(slice(1, -1) for _ in range(m))
    P = grid_pts[inner].reshape(-1, m)
    a = problem.diffusion_matrix(P)
    Y = problem.drift(P)
    res = problem.potential(P) * vals[inner].reshape(-1) + problem.source(P)
    var = (problem.potential(P) * ses[inner].reshape(-1)) ** 2

    def shifted(arr, offs):
        sl = tuple(slice(1 + o, arr.shape[i] - 1 + o) for i, o in enumerate(offs))
        return arr[sl].reshape(-1)

    for i in range(m):
        e = [0] * m
        e[i] = 1
        up, dn = shifted(vals, e), shifted(vals, [-v for v in e])
        sup, sdn = shifted(ses, e), shifted(ses, [-v for v in e])
        c0 = vals[inner].reshape(-1)
        s0 = ses[inner].reshape(-1)
        h = hs[i]
        res = res + Y[:, i] * (up - dn) / (2 * h) + a[:, i, i] * (up - 2 * c0 + dn) / h**2
        var = var + (Y[:, i] / (2 * h)) ** 2 * (sup**2 + sdn**2) + (a[:, i, i] / h**2) ** 2 * (sup**2 + 4 * s0**2 + sdn**2)
        for j in range(i + 1, m):
            if np.all(a[:, i, j] == 0):
                continue
            terms = []
            for si, sj, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                o = [0] * m
                o[i], o[j] = si, sj
                terms.append((sign, shifted(vals, o), shifted(ses, o)))
            mixed = sum(s * v for s, v, _ in terms) / (4 * h * hs[j])
            res = res + 2 * a[:, i, j] * mixed
            var = var + sum((2 * a[:, i, j] / (4 * h * hs[j])) ** 2 * sv**2 for _, _, sv in terms)
    absr = np.abs(res)
    return ResidualGrid(P, res, np.sqrt(var), float(absr.max()), float(np.median(absr)))


def interval_green(a: float, b: float):
    """Green's function of L = d^2/dx^2 / 2 on (a, b) with zero boundary values."""

    def G(x, y):
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        return 2.0 * (lo - a) * (b - hi) / (b - a)

    return G


def eigen_dirichlet(
    problem: ProblemSpec | None = None,
    q: int = 64,
    k: int = 5,
    kernel=None,
    n: int = 20_000,
    seed: int = 0,
    bins_per_node: int = 1,
) -> EigenResult:
    """Eigenvalues lambda of Psi = lambda int K Psi by Nystrom discretization.

    With ``kernel`` (a symmetric callable K(x, y)) or an interval problem with
    L = Laplacian / 2 and no potential, the analytic kernel is used;
    otherwise the kernel rows are estimated by binning baseline exit walks
    started at each node. Interval domains only.
    """
    if q < MIN_NYSTROM_NODES:
        raise ValueError(f"node count below minimum ({MIN_NYSTROM_NODES})")
    if problem is not None and problem.domain.shape != "interval":
        raise ValueError("Nystrom eigenvalues are implemented for intervals")
    a, b = (0.0, 1.0) if problem is None else (problem.domain.params["a"], problem.domain.params["b"])
    x, w = np.polynomial.legendre.leggauss(q)
    x = 0.5 * (b - a) * x + 0.5 * (b + a)
    w = 0.5 * (b - a) * w
    source = "analytic"
    if kernel is None and problem is not None and not _is_standard_heat(problem):
        Kmat = _estimated_kernel(problem, x, n, seed)
        Kmat = 0.5 * (Kmat + Kmat.T)
        source = "estimated"
    else:
        G = kernel or interval_green(a, b)
        Kmat = G(x[:, None], x[None, :])
    sw = np.sqrt(w)
    A = sw[:, None] * Kmat * sw[None, :]
    try:
        mu = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigen-iteration did not converge: {exc}") from exc
    mu = mu[mu > 1e-14 * np.max(np.abs(mu))]
    lam = np.sort(1.0 / mu)
    return EigenResult(lam[:k], q, source)


def _is_standard_heat(problem) -> bool:
    a = problem.diffusion_matrix(np.array([[0.5 * (problem.domain.params["a"] + problem.domain.params["b"])]]))[0, 0, 0]
    return (
        all(X.constant is not None for X in problem.frame)
        and problem.drift.is_zero
        and problem.potential.constant == 0.0
        and abs(a - 0.5) < 1e-12
    )


def _estimated_kernel(problem, nodes, n, seed):
    """Rows K(x_i, .) from occupation densities of baseline walks, read at the nodes."""
    from .kernels import kernel_density

    spec = problem.replace(exit_strategy=StochasticBaseline())
    a, b = spec.domain.params["a"], spec.domain.params["b"]
    edges = np.linspace(a, b, 4 * len(nodes) + 1)
    rows = []
    for i, x in enumerate(nodes):
        g = kernel_density(spec, [x], [edges], n, seed=_point_seed(seed, i))
        rows.append(np.interp(nodes, g.centers[0], g.density))
    return np.array(rows)


def exploratory_residual_report(
    config: dict,
    n: int = 2000,
    seed: int = 0,
    spacing: float = 0.0625,
    speeds=(0.5, 1.0, 2.0),
    energies=(math.pi / 4, math.pi, 4 * math.pi),
) -> dict:
    """Operator residual of the critical-exit solution for several exit strategies.

    No tolerance is asserted; the report tabulates max / median |L Psi + f|.
    """
    from .model import make_problem

    base = make_problem(config)
    dom = base.domain
    if dom.shape != "interval":
        raise ValueError("the exploratory report is defined on an interval")
    a, b = dom.params["a"], dom.params["b"]
    grid = np.arange(a, b + 0.5 * spacing, spacing).reshape(-1, 1)
    strategies = [CriticalDistance(c) for c in speeds] + [FixedEnergy(E) for E in energies]
    rows = []
    for strat in strategies:
        spec = base.replace(exit_strategy=strat)
        sol = solve_dirichlet(spec, grid, n, seed=seed)
        res = operator_residual(sol, spec)
        label = f"critical(c={strat.speed:g})" if isinstance(strat, CriticalDistance) else f"fixed-energy(E={strat.energy:g})"
        rows.append(
            {
                "mode": label,
                "speed": exit_speed_of(strat),
                "max_abs_residual": res.max_abs,
                "median_abs_residual": res.median_abs,
                "residual": res.residual.tolist(),
                "residual_stderr": res.stderr.tolist(),
                "points": res.points[:, 0].tolist(),
                "values": sol.values.tolist(),
            }
        )
    return {"problem_hash": base.fingerprint(), "spacing": spacing, "samples": n, "seed": seed, "rows": rows}


def exit_speed_of(strategy) -> float:
    return strategy.speed


def write_solution_csv(field: SolutionField, path) -> None:
    m = field.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(m)] + ["value", "stderr", "interior", "boundary", "on_boundary"])
        for p, v, s, i_, b_, ob in zip(field.points, field.values, field.stderr, field.interior, field.boundary, field.on_boundary):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v)), repr(float(s)), repr(float(i_)), repr(float(b_)), int(ob)])


def write_report(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
