"""The Feynman-Kac semigroup (U_t g)(x) = E[g(x(t)) exp(int_0^t V dt)] and reference kernels.

Sign convention: the weight is exp(+int V), so the generator carries +V.
A dissipative problem has V < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemSpec, TimeGrid, scalar_field
from .paths import concat, sample_endpoints, sample_paths

__all__ = [
    "DEFAULT_DT",
    "PropagatorEstimate",
    "propagate",
    "propagate_samples",
    "propagate_composed",
    "generator_residual",
    "analytic_propagator",
    "mean_and_se",
]

DEFAULT_DT = 1e-2


@dataclass(frozen=True)
class PropagatorEstimate:
    value: float
    stderr: float
    n: int
    horizon: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise FloatingPointError("non-finite propagator estimate")


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _grid(t: float, dt: float, steps: int | None) -> TimeGrid:
    return TimeGrid(t, steps) if steps is not None else TimeGrid.with_step(t, dt)


def propagate_samples(
    problem: ProblemSpec,
    g,
    x_a,
    t: float,
    n: int,
    seed: int = 0,
    stream: int = 0,
    dt: float = DEFAULT_DT,
    steps: int | None = None,
    antithetic: bool = False,
    workers: int = 1,
) -> np.ndarray:
    """Per-path values g(x(t)) exp(int V) for ``t > 0``."""
    g = scalar_field(g, problem.dimension)
    end, A = sample_endpoints(
        problem, _grid(t, dt, steps), n, seed=seed, stream=stream, start=x_a, antithetic=antithetic, workers=workers
    )
    return g(end) * np.exp(A)


def propagate(
    problem: ProblemSpec,
    g,
    x_a,
    t: float,
    n: int,
    seed: int = 0,
    stream: int = 0,
    dt: float = DEFAULT_DT,
    steps: int | None = None,
    antithetic: bool = False,
    workers: int = 1,
) -> PropagatorEstimate:
    """Monte Carlo estimate of (U_t g)(x_a); exact g(x_a) at t = 0.

    The Euler step is ``dt`` (the step count is rounded up) unless ``steps``
    is given. For constant coefficients the endpoint law is sampled exactly.
    """
    if t < 0:
        raise ValueError("horizon must be non-negative")
    if n < 1:
        raise ValueError("sample count must be at least 1")
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x_a)):
        raise ValueError("start point must be finite")
    g = scalar_field(g, problem.dimension)
    if t == 0:
        return PropagatorEstimate(float(g(x_a)), 0.0, n, 0.0)
    vals = propagate_samples(problem, g, x_a, t, n, seed, stream, dt, steps, antithetic, workers)
    mean, se = mean_and_se(vals)
    return PropagatorEstimate(mean, se, n, t)


def propagate_composed(
    problem: ProblemSpec,
    g,
    x_a,
    t_first: float,
    t_second: float,
    n: int,
    seed: int = 0,
    dt: float = DEFAULT_DT,
) -> PropagatorEstimate:
    """U_{t_first}(U_{t_second} g)(x_a) by splicing two independently seeded batches."""
    g = scalar_field(g, problem.dimension)
    first = sample_paths(problem, TimeGrid.with_step(t_first, dt), n, seed=seed, stream=0, start=x_a)
    second = sample_paths(
        problem, TimeGrid.with_step(t_second, dt), n, seed=seed, stream=1, start=first.endpoints.copy()
    )
    both = concat(first, second)
    vals = g(both.endpoints) * np.exp(both.potential_integral)
    mean, se = mean_and_se(vals)
    return PropagatorEstimate(mean, se, n, t_first + t_second)


def generator_residual(
    problem: ProblemSpec,
    g,
    x_a,
    t: float,
    n: int,
    seed: int = 0,
    h: float = 1e-2,
    steps: int = 50,
) -> tuple[float, float]:
    """d/dt U_t g - L U_t g at x_a by central differences, with common random numbers.

    Every stencil value is computed from the same seed and step count, so the
    per-path differences are strongly correlated and their standard error
    is small. Returns (residual, standard error).
    """
    g = scalar_field(g, problem.dimension)
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    m = x_a.size

    def U(x, tt):
        return propagate_samples(problem, g, x, tt, n, seed=seed, steps=steps)

    dtime = (U(x_a, t + h) - U(x_a, t - h)) / (2 * h)
    base = U(x_a, t)
    a = problem.diffusion_matrix(x_a[None, :])[0]
    Y = problem.drift(x_a)
    lu = problem.potential(x_a) * base
    e = np.eye(m) * h
    plus = [U(x_a + e[i], t) for i in range(m)]
    minus = [U(x_a - e[i], t) for i in range(m)]
    for i in range(m):
        lu = lu + Y[i] * (plus[i] - minus[i]) / (2 * h)
        lu = lu + a[i, i] * (plus[i] - 2 * base + minus[i]) / (h * h)
        for j in range(i + 1, m):
            if a[i, j] == 0:
                continue
            mixed = (
                U(x_a + e[i] + e[j], t) - U(x_a + e[i] - e[j], t) - U(x_a - e[i] + e[j], t) + U(x_a - e[i] - e[j], t)
            ) / (4 * h * h)
            lu = lu + 2 * a[i, j] * mixed
    return mean_and_se(dtime - lu)


def analytic_propagator(kind: str, t: float, x, y, **params) -> float:
    """Reference transition densities for L = Laplacian/2 (+ potential).

    ``free``: (2 pi t)^(-m/2) exp(-|x-y|^2 / 2t).
    ``half_line``: absorbed at 0, p(x, y) - p(x, -y).
    ``oscillator``: Mehler kernel for L = Laplacian/2 - omega^2 x^2 / 2 (1-D).
    """
    if not t > 0:
        raise ValueError("propagator needs t > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    kind = kind.replace("-", "_")
    if kind in ("free", "free_heat"):
        m = x.size
        return float((2 * math.pi * t) ** (-m / 2) * math.exp(-np.sum((x - y) ** 2) / (2 * t)))
    if kind in ("half_line", "half_line_image"):
        return analytic_propagator("free", t, x, y) - analytic_propagator("free", t, x, -y)
    if kind in ("oscillator", "harmonic_oscillator"):
        w = float(params.get("omega", 1.0))
        if w == 0:
            return analytic_propagator("free", t, x, y)
        x0, y0 = float(x[0]), float(y[0])
        sh, ch = math.sinh(w * t), math.cosh(w * t)
        return math.sqrt(w / (2 * math.pi * sh)) * math.exp(-w * ((x0 * x0 + y0 * y0) * ch - 2 * x0 * y0) / (2 * sh))
    raise ValueError(f"unknown propagator kind {kind!r}")
