"""Kernel functionals applied to fields (weak form).

With u(t) = (U_t f)(x_a) and tau the critical exit time of x_a:

    Dirichlet interior    int_0^tau u dt
    Dirichlet boundary    (U_tau phi)(x_a)
    K_inf                 int_0^inf u dt          (needs V <= -c < 0)
    F_U                   int_tau^inf u dt
    Neumann               K_inf + F_U

The Dirichlet and K_inf parts share the same time-node evaluations, so the
identities Dirichlet = K_inf - F_U and Neumann = K_inf + F_U hold for the
recorded parts up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .critical import exit_time
from .model import ProblemSpec, StochasticBaseline, TimeGrid, full_space, scalar_field
from .paths import exit_walk, nearest_boundary, sample_endpoints, stream_rng
from .propagator import DEFAULT_DT, mean_and_se, propagate

__all__ = [
    "KernelEstimate",
    "GridEstimate",
    "NonDissipativeError",
    "dirichlet_apply",
    "dirichlet_boundary_apply",
    "k_infinity_apply",
    "f_U_apply",
    "neumann_apply",
    "neumann_boundary_apply",
    "neumann_flux",
    "kernel_density",
    "write_grid_csv",
    "damping_constant",
    "NEUMANN_DOMAINS",
]

GL_NODES = 32
TAIL_NODES = 16
DEFAULT_TAIL_TOL = 1e-4
BASELINE_DT = 1e-3
NEUMANN_DOMAINS = ("interval", "half_space", "ball")


class NonDissipativeError(ValueError):
    pass


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    stderr: float
    parts: dict | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class GridEstimate:
    edges: list
    centers: list
    density: np.ndarray
    stderr: np.ndarray
    bin_volume: float
    total_mass: float
    outside_mass: float
    empty_bins: int
    meta: dict = field(default_factory=dict)

    def integrate(self, f) -> float:
        """Riemann sum of density * f over bin centers."""
        grids = np.meshgrid(*self.centers, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        return float(np.sum(self.density.reshape(-1) * f(pts)) * self.bin_volume)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _tau(problem: ProblemSpec, x_a) -> float:
    if not problem.domain.has_boundary:
        return math.inf
    return exit_time(problem, x_a).tau


def _check_start(problem, x_a):
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    if x_a.size != problem.dimension:
        raise ValueError(f"start point must have dimension {problem.dimension}")
    if problem.domain.has_boundary and problem.domain.distance(x_a) > 1e-12:
        raise ValueError("start point lies outside the closure of the domain")
    return x_a


def _gauss_legendre(a: float, b: float, k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _time_integral(problem, f, x_a, times, weights, n, seed, stream0, dt, workers):
    """sum_j w_j (U_{t_j} f)(x_a) with independent streams per node."""
    value = 0.0
    var = 0.0
    for j, (t, w) in enumerate(zip(times, weights)):
        est = propagate(problem, f, x_a, float(t), n, seed=seed, stream=stream0 + j, dt=dt, workers=workers)
        value += w * est.value
        var += (w * est.stderr) ** 2
    return value, var


def damping_constant(problem: ProblemSpec, x_a, seed: int = 0, damping: float | None = None) -> float:
    """c with V <= -c on the sampled region; raises for non-dissipative potentials."""
    if damping is not None:
        if not damping > 0:
            raise NonDissipativeError("explicit damping shift must be positive")
        return float(damping)
    V = problem.potential
    if V.constant is not None:
        c = -V.constant
    else:
        pts = _pilot_points(problem, x_a, seed)
        c = -float(np.max(V(pts)))
    if not c > 0:
        raise NonDissipativeError("non-dissipative potential: K_inf needs V <= -c < 0")
    return c


def _pilot_points(problem, x_a, seed):
    rng = stream_rng(seed, 9_999_999)
    x_a = np.asarray(x_a, dtype=float).reshape(1, -1)
    pts = [x_a, problem.domain.sample(rng, 512)]
    for t in (0.5, 2.0, 8.0):
        end, _ = sample_endpoints(problem, TimeGrid.with_step(t, 0.1), 256, seed=seed, stream=9_999_000 + int(t * 10), start=x_a[0])
        pts.append(end)
    return np.concatenate(pts)


def _split(problem, x_a, n, seed, nodes, dt, tol, damping, workers):
    """Shared evaluation of the interior part [0, tau] and the tail [tau, T*]."""
    if isinstance(problem.exit_strategy, StochasticBaseline) and problem.domain.has_boundary:
        raise ValueError("the K_inf / F_U split needs a critical exit strategy")
    f = problem.source
    c = damping_constant(problem, x_a, seed, damping)
    tau = _tau(problem, x_a)
    pts = _pilot_points(problem, x_a, seed) if f.constant is None else None
    fsup = abs(f.constant) if f.constant is not None else float(np.max(np.abs(f(pts))))
    T_star = math.log(1.0 / tol) / c
    meta = {"damping": c, "tau": tau, "T_star": T_star, "tail_tol": tol, "rule": "gauss-legendre"}
    if f.constant == 0.0:
        meta["truncation_bound"] = 0.0
        return 0.0, 0.0, 0.0, 0.0, meta
    # interior panel
    if tau == 0 or math.isinf(tau):
        d_val, d_var = 0.0, 0.0
        t_start = 0.0
    else:
        t_nodes, w_nodes = _gauss_legendre(0.0, tau, nodes)
        d_val, d_var = _time_integral(problem, f, x_a, t_nodes, w_nodes, n, seed, 0, dt, workers)
        t_start = tau
    # tail panels of geometrically growing width
    f_val, f_var = 0.0, 0.0
    a = t_start
    width = 1.0 / c
    stream = 100_000
    panels = []
    while a < T_star:
        b = min(a + width, T_star)
        panels.append((a, b))
        t_nodes, w_nodes = _gauss_legendre(a, b, TAIL_NODES)
        v, s2 = _time_integral(problem, f, x_a, t_nodes, w_nodes, n, seed, stream, dt, workers)
        f_val += v
        f_var += s2
        stream += TAIL_NODES
        a = b
        width *= 2
    bound = fsup * math.exp(-c * max(T_star, t_start)) / c
    meta.update({"panels": panels, "interior_nodes": nodes, "truncation_bound": bound})
    if math.isinf(tau):
        # no boundary: the whole integral is K_inf and F_U vanishes
        return f_val, f_var, 0.0, 0.0, meta
    return d_val, d_var, f_val, f_var, meta


# --------------------------------------------------------------------------
# Dirichlet
# --------------------------------------------------------------------------


def dirichlet_apply(
    problem: ProblemSpec,
    x_a,
    n: int,
    seed: int = 0,
    nodes: int = GL_NODES,
    dt: float | None = None,
    decompose: bool = False,
    tail_tol: float = DEFAULT_TAIL_TOL,
    damping: float | None = None,
    workers: int = 1,
) -> KernelEstimate:
    """int K_U^(D)(x_a, x') f(x') dx' = int_0^tau (U_t f)(x_a) dt.

    In StochasticBaseline mode tau is the per-path first exit time and the
    integral is accumulated along each walk.
    """
    x_a = _check_start(problem, x_a)
    f = problem.source
    if isinstance(problem.exit_strategy, StochasticBaseline):
        step = dt or BASELINE_DT
        if problem.domain.distance(x_a) >= 0 or f.constant == 0.0:
            return KernelEstimate(0.0, 0.0, None, {"mode": "baseline"})
        walk = exit_walk(problem, x_a, n, seed=seed, dt=step, f=f, workers=workers)
        mean, se = mean_and_se(walk.running)
        return KernelEstimate(mean, se, None, {"mode": "baseline", "dt": step, "unexited": int(np.sum(~walk.exited))})
    step = dt or DEFAULT_DT
    if decompose:
        d_val, d_var, f_val, f_var, meta = _split(problem, x_a, n, seed, nodes, step, tail_tol, damping, workers)
        k_inf = d_val + f_val
        parts = {"k_infinity": k_inf, "f_U": f_val}
        return KernelEstimate(k_inf - f_val, math.sqrt(d_var), parts, {"mode": "critical", **meta})
    tau = _tau(problem, x_a)
    if tau == 0 or f.constant == 0.0:
        return KernelEstimate(0.0, 0.0, None, {"mode": "critical", "tau": tau})
    if math.isinf(tau):
        raise ValueError("domain has no boundary: use k_infinity_apply")
    t_nodes, w_nodes = _gauss_legendre(0.0, tau, nodes)
    val, var = _time_integral(problem, f, x_a, t_nodes, w_nodes, n, seed, 0, step, workers)
    return KernelEstimate(val, math.sqrt(var), None, {"mode": "critical", "tau": tau, "nodes": nodes, "rule": "gauss-legendre"})


def dirichlet_boundary_apply(
    problem: ProblemSpec,
    x_a,
    n: int,
    seed: int = 0,
    dt: float | None = None,
    workers: int = 1,
) -> KernelEstimate:
    """int K_d^(D)(x_a, x_B) phi(x_B) dx_B = (U_tau phi)(x_a); phi(x_a) exactly on the boundary."""
    x_a = _check_start(problem, x_a)
    phi = problem.boundary_data
    if problem.domain.has_boundary and problem.domain.distance(x_a) >= 0:
        return KernelEstimate(float(phi(x_a)), 0.0, None, {"tau": 0.0})
    if isinstance(problem.exit_strategy, StochasticBaseline):
        step = dt or BASELINE_DT
        walk = exit_walk(problem, x_a, n, seed=seed, stream=1, dt=step, workers=workers)
        vals = np.where(walk.exited, phi(walk.exit_point) * np.exp(walk.log_weight), 0.0)
        mean, se = mean_and_se(vals)
        return KernelEstimate(mean, se, None, {"mode": "baseline", "dt": step, "unexited": int(np.sum(~walk.exited))})
    tau = _tau(problem, x_a)
    est = propagate(problem, phi, x_a, tau, n, seed=seed, stream=500_000, dt=dt or DEFAULT_DT, workers=workers)
    return KernelEstimate(est.value, est.stderr, None, {"mode": "critical", "tau": tau})


# --------------------------------------------------------------------------
# K_inf / F_U / Neumann
# --------------------------------------------------------------------------


def k_infinity_apply(
    problem: ProblemSpec,
    x_a,
    n: int,
    seed: int = 0,
    tail_tol: float = DEFAULT_TAIL_TOL,
    damping: float | None = None,
    nodes: int = GL_NODES,
    dt: float | None = None,
    workers: int = 1,
) -> KernelEstimate:
    """int_0^inf (U_t f)(x_a) dt, truncated where ||f|| exp(-c T*) / c drops below tol * ||f|| / c."""
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    d_val, d_var, f_val, f_var, meta = _split(problem, x_a, n, seed, nodes, dt or DEFAULT_DT, tail_tol, damping, workers)
    value = d_val + f_val
    return KernelEstimate(value, math.sqrt(d_var + f_var), {"dirichlet": d_val, "f_U": f_val}, meta)


def f_U_apply(
    problem: ProblemSpec,
    x_a,
    n: int,
    seed: int = 0,
    tail_tol: float = DEFAULT_TAIL_TOL,
    damping: float | None = None,
    nodes: int = GL_NODES,
    dt: float | None = None,
    workers: int = 1,
) -> KernelEstimate:
    """int_tau^inf (U_t f)(x_a) dt with the same tail control as k_infinity_apply."""
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    d_val, d_var, f_val, f_var, meta = _split(problem, x_a, n, seed, nodes, dt or DEFAULT_DT, tail_tol, damping, workers)
    return KernelEstimate(f_val, math.sqrt(f_var), {"k_infinity": d_val + f_val, "dirichlet": d_val}, meta)


def _reflect(problem, x_a):
    dom = problem.domain
    if dom.shape not in ("interval", "half_space"):
        raise ValueError("the reflected form is implemented for intervals and half-spaces")
    return 2.0 * nearest_boundary(dom, x_a[None, :])[0] - x_a


def neumann_apply(
    problem: ProblemSpec,
    x_a,
    n: int,
    seed: int = 0,
    tail_tol: float = DEFAULT_TAIL_TOL,
    damping: float | None = None,
    nodes: int = GL_NODES,
    dt: float | None = None,
    form: str = "direct",
    workers: int = 1,
) -> KernelEstimate:
    """K_inf + F_U applied to f.

    ``form="direct"`` uses the defining time integral of F_U. ``form="reflected"``
    replaces it by the transformed version whose start is the mirror image of
    x_a in the boundary, i.e. K_inf evaluated at the reflected point (half-line
    and interval only).
    """
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    step = dt or DEFAULT_DT
    d_val, d_var, f_val, f_var, meta = _split(problem, x_a, n, seed, nodes, step, tail_tol, damping, workers)
    k_inf = d_val + f_val
    if form == "direct":
        value = k_inf + f_val
        # the tail evaluations enter twice
        se = math.sqrt(d_var + 4 * f_var)
        return KernelEstimate(value, se, {"k_infinity": k_inf, "f_U": f_val}, {**meta, "form": form})
    if form != "reflected":
        raise ValueError("form must be 'direct' or 'reflected'")
    x_r = _reflect(problem, x_a)
    full = problem.replace(domain=full_space(problem.dimension))
    r_val, r_var, _, _, _ = _split(full, x_r, n, seed + 1, nodes, step, tail_tol, damping, workers)
    value = k_inf + r_val
    return KernelEstimate(
        value, math.sqrt(d_var + f_var + r_var), {"k_infinity": k_inf, "f_U": r_val}, {**meta, "form": form, "reflected_start": x_r.tolist()}
    )


def neumann_boundary_apply(
    problem: ProblemSpec,
    x_a,
    psi,
    n: int,
    seed: int = 0,
    dt: float | None = None,
    return_samples: bool = False,
    workers: int = 1,
) -> KernelEstimate:
    """int K_d^(N)(x_a, x_B) psi(x_B) dx_B with the step kernel taken in Gauss normal
    coordinates: E[H(depth(x(tau))) psi(pi(x(tau))) exp(int V)], pi = nearest boundary point."""
    dom = problem.domain
    if dom.shape not in NEUMANN_DOMAINS:
        raise ValueError(f"unsupported domain {dom.shape!r} for the Neumann boundary kernel")
    if isinstance(problem.exit_strategy, StochasticBaseline):
        raise ValueError("the Neumann boundary kernel needs a critical exit strategy")
    x_a = _check_start(problem, x_a)
    psi = scalar_field(psi, problem.dimension)
    tau = _tau(problem, x_a)
    if tau == 0 or psi.constant == 0.0:
        return KernelEstimate(0.0, 0.0, None, {"tau": tau, "inside_fraction": 0.0})
    end, A = sample_endpoints(
        problem, TimeGrid.with_step(tau, dt or DEFAULT_DT), n, seed=seed, stream=700_000, start=x_a, workers=workers
    )
    inside = dom.distance(end) < 0
    vals = np.where(inside, psi(nearest_boundary(dom, end)) * np.exp(A), 0.0)
    mean, se = mean_and_se(vals)
    meta = {"tau": tau, "inside_fraction": float(np.mean(inside))}
    if return_samples:
        meta["samples"] = vals
    return KernelEstimate(mean, se, None, meta)


def neumann_flux(
    problem: ProblemSpec,
    x_B,
    h: float,
    n: int,
    seed: int = 0,
    form: str = "direct",
    **kw,
) -> tuple[float, float]:
    """Inward normal derivative of x -> neumann_apply(x) at a boundary point.

    Second-order one-sided difference (-3 N(0) + 4 N(h) - N(2h)) / 2h. All
    three evaluations use the same seed, so for constant coefficients their
    noise is common and largely cancels; the returned standard error treats
    them as independent and is therefore conservative.
    """
    x_B = np.asarray(x_B, dtype=float).reshape(-1)
    if abs(problem.domain.distance(x_B)) > 1e-12:
        raise ValueError("x_B must lie on the boundary")
    nvec = problem.domain.inward_normal(x_B)
    ests = [neumann_apply(problem, x_B + k * h * nvec, n, seed, form=form, **kw) for k in (0, 1, 2)]
    coef = (-3.0, 4.0, -1.0)
    val = sum(c * e.value for c, e in zip(coef, ests)) / (2 * h)
    se = math.sqrt(sum((c * e.stderr) ** 2 for c, e in zip(coef, ests))) / (2 * h)
    return val, se


# --------------------------------------------------------------------------
# pointwise density (inspection only)
# --------------------------------------------------------------------------


def kernel_density(
    problem: ProblemSpec,
    x_a,
    edges,
    n: int,
    seed: int = 0,
    nodes: int = GL_NODES,
    dt: float | None = None,
    batches: int = 16,
    workers: int = 1,
) -> GridEstimate:
    """Binned estimate of y -> K_U^(D)(x_a, y).

    Critical mode bins the endpoints at each Gauss-Legendre time node;
    baseline mode bins the weighted occupation time of each walk. Standard
    errors come from ``batches`` interleaved sample groups.
    """
    x_a = _check_start(problem, x_a)
    edges = [np.asarray(e, dtype=float) for e in edges]
    if len(edges) != problem.dimension:
        raise ValueError("need one edge array per coordinate")
    shape = tuple(len(e) - 1 for e in edges)
    nb = int(np.prod(shape))
    vol = float(np.prod([np.diff(e)[0] for e in edges]))
    for e in edges:
        if not np.allclose(np.diff(e), np.diff(e)[0]):
            raise ValueError("edges must be uniformly spaced")
    batch_ids = np.arange(n) % batches
    if isinstance(problem.exit_strategy, StochasticBaseline):
        step = dt or BASELINE_DT
        one = lambda x: np.ones(x.shape[0])  # noqa: E731
        walk = exit_walk(problem, x_a, n, seed=seed, dt=step, f=one, edges=edges, batches=batches, workers=workers)
        occ = walk.occupation
        total = float(np.mean(walk.running))
        mode = "baseline"
    else:
        from .paths import _bin_index

        tau = _tau(problem, x_a)
        occ = np.zeros((batches, nb))
        total = 0.0
        if tau > 0:
            t_nodes, w_nodes = _gauss_legendre(0.0, tau, nodes)
            for j, (t, w) in enumerate(zip(t_nodes, w_nodes)):
                end, A = sample_endpoints(
                    problem, TimeGrid.with_step(float(t), dt or DEFAULT_DT), n, seed=seed, stream=j, start=x_a, workers=workers
                )
                wt = w * np.exp(A)
                total += float(np.mean(wt))
                cell = _bin_index(end, edges)
                ok = cell >= 0
                np.add.at(occ, (batch_ids[ok], cell[ok]), wt[ok])
        mode = "critical"
    per_batch = np.bincount(batch_ids, minlength=batches).astype(float)
    dens_b = occ / (per_batch[:, None] * vol)
    density = (occ.sum(axis=0) / (n * vol)).reshape(shape)
    stderr = (dens_b.std(axis=0, ddof=1) / math.sqrt(batches)).reshape(shape)
    inside_mass = float(density.sum() * vol)
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    return GridEstimate(
        edges=edges,
        centers=centers,
        density=density,
        stderr=stderr,
        bin_volume=vol,
        total_mass=total,
        outside_mass=total - inside_mass,
        empty_bins=int(np.sum(density == 0)),
        meta={"mode": mode, "batches": batches, "n": n},
    )


def write_grid_csv(grid: GridEstimate, path) -> None:
    """Rows x1..xm,value,stderr at bin centers."""
    mesh = np.meshgrid(*grid.centers, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(pts.shape[1])] + ["value", "stderr"])
        for p, v, s in zip(pts, grid.density.reshape(-1), grid.stderr.reshape(-1)):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v)), repr(float(s))])
