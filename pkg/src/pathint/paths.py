"""Euler sampling of the parametrization ODE dx = Y dt + X_a dz^a.

Randomness is drawn in fixed-size chunks of samples, each with its own
Philox stream keyed by (seed, stream, chunk index). Results are reduced in
chunk order, so they do not depend on how chunks are spread over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ProblemSpec, TimeGrid

__all__ = [
    "CHUNK",
    "PathBatch",
    "ExitSample",
    "stream_rng",
    "sample_paths",
    "sample_endpoints",
    "concat",
    "exit_walk",
    "write_paths_csv",
    "nearest_boundary",
]

CHUNK = 8192


def stream_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the job identified by ``keys``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def _map_chunks(fn, count: int, workers: int):
    if workers <= 1 or count <= 1:
        return [fn(c) for c in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


@dataclass(eq=False)
class PathBatch:
    grid: TimeGrid
    start: np.ndarray  # (n, m)
    paths: np.ndarray  # (n, N + 1, m)
    increments: np.ndarray  # (n, N, d)
    potential_integral: np.ndarray  # (n,), trapezoid rule
    seed: int = 0
    stream: int = 0

    @property
    def n(self) -> int:
        return self.paths.shape[0]

    @property
    def endpoints(self) -> np.ndarray:
        return self.paths[:, -1, :]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.potential_integral)


def _start_rows(problem: ProblemSpec, start, n: int) -> np.ndarray:
    x = np.asarray(start, dtype=float)
    m = problem.dimension
    if x.ndim == 1:
        if x.size != m:
            raise ValueError(f"start point must have dimension {m}")
        return np.broadcast_to(x, (n, m))
    if x.shape != (n, m):
        raise ValueError(f"per-path starts must have shape ({n}, {m})")
    return x


def _constant_coefficients(problem: ProblemSpec) -> bool:
    return (
        all(X.constant is not None for X in problem.frame)
        and problem.drift.constant is not None
        and problem.potential.constant is not None
    )


def _simulate(problem, grid, x0, rng, keep: bool, antithetic: bool):
    """Euler scheme for one chunk. Returns (endpoints, log-weights, paths, increments)."""
    b, m = x0.shape
    d = len(problem.frame)
    N = grid.steps
    dt = grid.dt
    sd = math.sqrt(problem.increment_variance_rate * dt)
    V = problem.potential

    def normals(shape):
        if not antithetic:
            return rng.standard_normal(shape)
        half = rng.standard_normal(((shape[0] + 1) // 2,) + shape[1:])
        return np.concatenate([half, -half])[: shape[0]]

    if not keep and _constant_coefficients(problem):
        # exact in law in a single draw
        X = problem.frame_matrix(np.zeros((1, m)))[0]
        Y = np.asarray(problem.drift.constant)
        z = normals((b, d)) * math.sqrt(problem.increment_variance_rate * grid.horizon)
        end = x0 + Y * grid.horizon + z @ X.T
        A = np.full(b, V.constant * grid.horizon)
        return end, A, None, None

    x = np.array(x0, dtype=float)
    A = np.zeros(b)
    v_prev = V(x)
    paths = np.empty((b, N + 1, m)) if keep else None
    incs = np.empty((b, N, d)) if keep else None
    if keep:
        paths[:, 0] = x
    for k in range(N):
        dz = normals((b, d)) * sd
        step = problem.drift(x) * dt
        if d:
            step = step + np.einsum("nia,na->ni", problem.frame_matrix(x), dz)
        x = x + step
        v_next = V(x)
        A += 0.5 * (v_prev + v_next) * dt
        v_prev = v_next
        if keep:
            paths[:, k + 1] = x
            incs[:, k] = dz
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(A)):
        raise FloatingPointError("non-finite state in path sampling")
    if V.constant is not None:
        A = np.full(b, V.constant * grid.horizon)
    return x, A, paths, incs


def sample_paths(
    problem: ProblemSpec,
    grid: TimeGrid,
    n: int,
    seed: int = 0,
    stream: int = 0,
    start=None,
    antithetic: bool = False,
    workers: int = 1,
) -> PathBatch:
    """Full discretized paths from ``start`` (default: the origin)."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    m = problem.dimension
    x0 = _start_rows(problem, np.zeros(m) if start is None else start, n)
    nchunks = -(-n // CHUNK)

    def job(c):
        lo, hi = c * CHUNK, min(n, (c + 1) * CHUNK)
        return _simulate(problem, grid, x0[lo:hi], stream_rng(seed, stream, c), True, antithetic)

    parts = _map_chunks(job, nchunks, workers)
    paths = np.concatenate([p[2] for p in parts])
    paths[:, 0] = x0  # exact start
    return PathBatch(
        grid=grid,
        start=np.array(x0),
        paths=paths,
        increments=np.concatenate([p[3] for p in parts]),
        potential_integral=np.concatenate([p[1] for p in parts]),
        seed=seed,
        stream=stream,
    )


def sample_endpoints(
    problem: ProblemSpec,
    grid: TimeGrid,
    n: int,
    seed: int = 0,
    stream: int = 0,
    start=None,
    antithetic: bool = False,
    workers: int = 1,
):
    """Endpoints ``(n, m)`` and log-weights int V dt ``(n,)`` without storing paths."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    m = problem.dimension
    x0 = _start_rows(problem, np.zeros(m) if start is None else start, n)
    nchunks = -(-n // CHUNK)

    def job(c):
        lo, hi = c * CHUNK, min(n, (c + 1) * CHUNK)
        end, A, _, _ = _simulate(problem, grid, x0[lo:hi], stream_rng(seed, stream, c), False, antithetic)
        return end, A

    parts = _map_chunks(job, nchunks, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def concat(first: PathBatch, second: PathBatch) -> PathBatch:
    """Splice ``second`` (started at the endpoints of ``first``) onto ``first``."""
    if second.n == 0 or first.n == 0:
        raise ValueError("cannot splice an empty batch")
    if second.n != first.n:
        raise ValueError("batches must have the same number of paths")
    if not math.isclose(first.grid.dt, second.grid.dt, rel_tol=1e-12):
        raise ValueError("grid mismatch: both batches need the same step")
    if not np.array_equal(second.paths[:, 0], first.endpoints):
        raise ValueError("second batch must start at the endpoints of the first")
    if (first.seed, first.stream) == (second.seed, second.stream):
        raise ValueError("second batch must be seeded independently of the first")
    grid = TimeGrid(first.grid.horizon + second.grid.horizon, first.grid.steps + second.grid.steps)
    return PathBatch(
        grid=grid,
        start=first.start,
        paths=np.concatenate([first.paths, second.paths[:, 1:]], axis=1),
        increments=np.concatenate([first.increments, second.increments], axis=1),
        potential_integral=first.potential_integral + second.potential_integral,
        seed=first.seed,
        stream=first.stream,
    )


# --------------------------------------------------------------------------
# first-exit walks (the stochastic baseline)
# --------------------------------------------------------------------------


@dataclass(eq=False)
class ExitSample:
    """Per-path first-exit data. ``running`` is int_0^tau exp(A) f dt."""

    exit_time: np.ndarray
    exit_point: np.ndarray
    log_weight: np.ndarray  # int_0^tau V dt
    running: np.ndarray
    exited: np.ndarray  # False for paths stopped by the time cap
    occupation: np.ndarray | None = None  # (batches, bins) weighted occupation times
    meta: dict = field(default_factory=dict)


def _exit_chunk(problem, x0, rng, dt, max_time, f, bins, batch_ids):
    """Euler walk with a Brownian-bridge crossing test between nodes.

    A path that crosses (or is judged by the bridge test to have touched the
    boundary) during a step is credited with a fraction theta of that step:
    the linear-interpolation fraction for an overshoot, 1/2 for a bridge hit.
    """
    dom = problem.domain
    b, m = x0.shape
    d = len(problem.frame)
    var = problem.increment_variance_rate
    sd = math.sqrt(var * dt)
    V = problem.potential

    tau = np.zeros(b)
    A_exit = np.zeros(b)
    run = np.zeros(b)
    exit_pt = np.array(x0, dtype=float)
    exited = np.zeros(b, dtype=bool)
    occ = None
    if bins is not None:
        edges, nb, nbatch = bins
        occ = np.zeros(nbatch * nb)

    depth = -dom.distance(x0)
    exited[depth <= 0] = True
    live = depth > 0
    idx = np.flatnonzero(live)
    x = np.array(x0[live], dtype=float)
    depth = depth[live]
    A = np.zeros(idx.size)
    t = 0.0
    const_frame = all(X.constant is not None for X in problem.frame)
    if const_frame:
        X0 = problem.frame_matrix(np.zeros((1, m)))[0]
    const_drift = problem.drift.constant is not None
    Y0 = np.asarray(problem.drift.constant) if const_drift else None
    while idx.size and t < max_time - 0.5 * dt:
        dz = rng.standard_normal((idx.size, d)) * sd
        drift = Y0 * dt if const_drift else problem.drift(x) * dt
        n_in = dom.inward_normal(_nudge(dom, x))
        if const_frame:
            x_new = x + drift + dz @ X0.T
            s2 = var * np.sum((n_in @ X0) ** 2, axis=1)
        else:
            F = problem.frame_matrix(x)
            x_new = x + drift + np.einsum("nia,na->ni", F, dz)
            s2 = var * np.sum(np.einsum("nia,ni->na", F, n_in) ** 2, axis=1)
        depth_new = -dom.distance(x_new)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            p_cross = np.where(
                depth_new > 0, np.exp(-2.0 * depth * depth_new / np.maximum(s2 * dt, 1e-300)), 1.0
            )
        u = rng.uniform(size=idx.size)
        out = (depth_new <= 0) | (u < p_cross)
        theta = np.where(depth_new <= 0, depth / np.maximum(depth - depth_new, 1e-300), 0.5)
        h = np.where(out, theta, 1.0) * dt
        vx = V(x) if V.constant is None else V.constant
        ew = np.exp(A)
        if f is not None:
            run[idx] += h * ew * f(x)
        if occ is not None:
            cell = _bin_index(x, edges)
            ok = cell >= 0
            np.add.at(occ, batch_ids[idx[ok]] * nb + cell[ok], (h * ew)[ok])
        v_new = V(x_new) if V.constant is None else V.constant
        A_next = np.where(out, A + h * vx, A + 0.5 * (vx + v_new) * dt)
        tau[idx] = t + h
        if np.any(out):
            j = idx[out]
            cross = x[out] + (h[out] / dt)[:, None] * (x_new[out] - x[out])
            exit_pt[j] = nearest_boundary(dom, cross)
            A_exit[j] = A_next[out]
            exited[j] = True
        # paths whose weight is negligible stop contributing
        keep = ~out & (A_next > _LOG_NEGLIGIBLE)
        dead = ~out & ~keep
        if np.any(dead):
            A_exit[idx[dead]] = A_next[dead]
            exit_pt[idx[dead]] = x_new[dead]
        idx, x, A, depth = idx[keep], x_new[keep], A_next[keep], depth_new[keep]
        t += dt
    if idx.size:
        A_exit[idx] = A
        exit_pt[idx] = x
    if not np.all(np.isfinite(run)) or not np.all(np.isfinite(A_exit)):
        raise FloatingPointError("non-finite state in exit walk")
    return tau, exit_pt, A_exit, run, exited, occ


_LOG_NEGLIGIBLE = math.log(1e-18)


def exit_walk(
    problem: ProblemSpec,
    start,
    n: int,
    seed: int = 0,
    stream: int = 0,
    dt: float = 1e-3,
    max_time: float | None = None,
    f=None,
    edges=None,
    batches: int = 16,
    workers: int = 1,
) -> ExitSample:
    """Walk ``n`` paths from ``start`` until they leave the domain.

    ``f`` (vectorized scalar field) is accumulated as int_0^tau exp(A) f dt.
    With ``edges`` (one edge array per coordinate) the weighted occupation
    time is histogrammed, split into ``batches`` interleaved sample groups so
    that bin standard errors can be taken from batch means.
    """
    if n < 1:
        raise ValueError("sample count must be at least 1")
    if not problem.domain.has_boundary:
        raise ValueError("exit walks need a domain with a boundary")
    m = problem.dimension
    x0 = _start_rows(problem, start, n)
    if max_time is None:
        ext = problem.domain.extent
        max_time = 200.0 * (ext * ext if math.isfinite(ext) else 1.0) / max(problem.increment_variance_rate, 1e-300)
    bins = None
    batch_ids = np.arange(n) % batches
    nb = 0
    if edges is not None:
        edges = [np.asarray(e, dtype=float) for e in edges]
        if len(edges) != m:
            raise ValueError("need one edge array per coordinate")
        nb = int(np.prod([len(e) - 1 for e in edges]))
        bins = (edges, nb, batches)
    nchunks = -(-n // CHUNK)

    def job(c):
        lo, hi = c * CHUNK, min(n, (c + 1) * CHUNK)
        return _exit_chunk(
            problem, x0[lo:hi], stream_rng(seed, stream, c), dt, max_time, f, bins, batch_ids[lo:hi]
        )

    parts = _map_chunks(job, nchunks, workers)
    occ = None
    if bins is not None:
        occ = np.sum([p[5] for p in parts], axis=0).reshape(batches, nb)
    return ExitSample(
        exit_time=np.concatenate([p[0] for p in parts]),
        exit_point=np.concatenate([p[1] for p in parts]),
        log_weight=np.concatenate([p[2] for p in parts]),
        running=np.concatenate([p[3] for p in parts]),
        exited=np.concatenate([p[4] for p in parts]),
        occupation=occ,
        meta={"dt": dt, "max_time": max_time, "batches": batches},
    )


def _nudge(dom, x):
    # the ball normal is undefined at the center; move off it by a hair
    if dom.shape in ("ball", "annulus"):
        c = np.asarray(dom.params["center"])
        at_c = np.linalg.norm(x - c, axis=1) == 0
        if np.any(at_c):
            x = x.copy()
            x[at_c, 0] += 1e-12
    return x


def nearest_boundary(dom, pts):
    """One nearest boundary point per row of ``pts`` (ties broken by ``Domain.project``)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    p = dom.params
    if dom.shape == "interval":
        a, b = p["a"], p["b"]
        return np.where(np.abs(pts - a) <= np.abs(b - pts), a, b)
    if dom.shape == "half_space":
        n = np.asarray(p["normal"], dtype=float)
        return pts - (pts @ n - p["offset"])[:, None] * n
    if dom.shape == "ball":
        c = np.asarray(p["center"], dtype=float)
        v = pts - c
        r = np.linalg.norm(v, axis=1, keepdims=True)
        e0 = np.zeros(dom.dimension)
        e0[0] = 1.0
        u = np.where(r > 0, v / np.where(r > 0, r, 1.0), e0)
        return c + p["radius"] * u
    return np.array([dom.project(q)[0] for q in pts]).reshape(pts.shape)


def _bin_index(x, edges):
    """Flat histogram cell for points ``(n, m)``; -1 outside the grid."""
    cell = np.zeros(x.shape[0], dtype=np.int64)
    ok = np.ones(x.shape[0], dtype=bool)
    for i, e in enumerate(edges):
        k = np.searchsorted(e, x[:, i], side="right") - 1
        ok &= (k >= 0) & (k < len(e) - 1)
        cell = cell * (len(e) - 1) + np.clip(k, 0, len(e) - 2)
    return np.where(ok, cell, -1)


def write_paths_csv(batch: PathBatch, path) -> None:
    """Dump a batch as rows sample,node,t,x1..xm."""
    m = batch.paths.shape[2]
    t = batch.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "node", "t"] + [f"x{i + 1}" for i in range(m)])
        for i in range(batch.n):
            for k in range(batch.paths.shape[1]):
                w.writerow([i, k, repr(float(t[k]))] + [repr(float(v)) for v in batch.paths[i, k]])
