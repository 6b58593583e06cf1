"""Critical paths, the exit time tau_perp and the exit map sigma.

The critical path from x_a is the straight segment to the nearest boundary
point, traversed at constant speed: c for CriticalDistance, sqrt(E / pi)
for FixedEnergy (the energy relation for the density pi |xdot|^2). The
potential is ignored in this geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import CriticalDistance, FixedEnergy, ProblemSpec, StochasticBaseline

__all__ = [
    "CriticalPath",
    "ExitProfile",
    "exit_time",
    "exit_speed",
    "transversality_residual",
    "energy_residual",
    "straight_path",
]

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CriticalPath:
    nodes: np.ndarray  # (K, m)
    times: np.ndarray  # (K,)
    multiplier: float = math.nan  # transversality constant
    terminal: dict = field(default_factory=dict)

    @property
    def terminal_velocity(self) -> np.ndarray:
        if len(self.times) < 2:
            return np.zeros(self.nodes.shape[1])
        return (self.nodes[-1] - self.nodes[-2]) / (self.times[-1] - self.times[-2])


@dataclass(frozen=True, eq=False)
class ExitProfile:
    start: np.ndarray
    tau: float
    exit_point: np.ndarray
    path: CriticalPath
    transversality: float
    energy: float
    strategy: object
    candidates: tuple = ()  # (tau, exit point) pairs for every critical segment, nearest first


def straight_path(x_a, x_b, speed: float, nodes: int = 33) -> CriticalPath:
    x_a = np.asarray(x_a, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    T = float(np.linalg.norm(x_b - x_a)) / speed
    s = np.linspace(0.0, 1.0, nodes)
    return CriticalPath(x_a + s[:, None] * (x_b - x_a), s * T)


def exit_speed(strategy) -> float:
    if isinstance(strategy, CriticalDistance):
        return strategy.speed
    if isinstance(strategy, FixedEnergy):
        return strategy.speed
    raise ValueError("the stochastic baseline has no path-independent exit time")


def _lagrangian_grad(v):
    return 2 * math.pi * v


def exit_time(problem: ProblemSpec, x_a) -> ExitProfile:
    """tau_perp = dist(x_a, boundary) / speed, sigma(x_a) = nearest boundary point."""
    strategy = problem.exit_strategy
    if isinstance(strategy, StochasticBaseline):
        raise ValueError("the stochastic baseline has no path-independent exit time")
    dom = problem.domain
    if not dom.has_boundary:
        raise ValueError("domain has no boundary: the exit time is infinite")
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    d = dom.distance(x_a)
    if d > BOUNDARY_TOL:
        raise ValueError("start point lies outside the closure of the domain")
    speed = exit_speed(strategy)
    if abs(d) <= BOUNDARY_TOL:
        path = CriticalPath(x_a[None, :], np.zeros(1), terminal={"on_boundary": True})
        return ExitProfile(x_a, 0.0, x_a.copy(), path, 0.0, 0.0, strategy, ((0.0, x_a.copy()),))
    nearest = dom.project(x_a)
    sigma = nearest[0]
    tau = -d / speed
    path = straight_path(x_a, sigma, speed)
    normal = dom.inward_normal(sigma)
    v = path.terminal_velocity
    nu = _multiplier(v, -normal)
    path = CriticalPath(path.nodes, path.times, nu, {"normal": normal})
    trans = transversality_residual(path, grad_S=-normal)
    en = energy_residual(path, energy=math.pi * speed * speed)
    cands = []
    for p in dom.normal_candidates(x_a):
        cands.append((float(np.linalg.norm(p - x_a)) / speed, p))
    if len(nearest) > 1:
        # symmetric starts: every nearest point is an equally valid exit
        cands = [(tau, p) for p in nearest] + [c for c in cands if c[0] > tau * (1 + 1e-12)]
    return ExitProfile(x_a, tau, sigma, path, trans, en, strategy, tuple(cands))


def _multiplier(v, grad_S):
    # scalar form F = -nu grad S . xdot with F = pi |v|^2
    denom = float(np.dot(grad_S, v))
    if denom == 0:
        return math.nan
    return -math.pi * float(np.dot(v, v)) / denom


def transversality_residual(
    path: CriticalPath,
    grad_S=None,
    momentum: Callable | None = None,
    S: Callable | None = None,
) -> float:
    """min over nu of |dF/dxdot + nu grad S| at the terminal node.

    The vector form is used: it vanishes exactly when the terminal momentum
    is parallel to the boundary normal (for F = pi |xdot|^2 the momentum is
    2 pi xdot). ``grad_S`` may be given directly or obtained from ``S`` by
    central differences.
    """
    v = path.terminal_velocity
    if not np.any(v):
        raise ValueError("zero terminal velocity")
    p = momentum(v) if momentum is not None else _lagrangian_grad(v)
    if grad_S is None:
        if S is None:
            raise ValueError("need grad_S or S")
        xb = path.nodes[-1]
        grad_S = np.empty_like(xb)
        for i in range(xb.size):
            h = 1e-6 * (1 + abs(xb[i]))
            e = np.zeros_like(xb)
            e[i] = h
            grad_S[i] = (S(xb + e) - S(xb - e)) / (2 * h)
    g = np.asarray(grad_S, dtype=float)
    gg = float(g @ g)
    if gg == 0:
        raise ValueError("degenerate boundary gradient")
    nu = -float(p @ g) / gg
    return float(np.linalg.norm(p + nu * g))


def energy_residual(
    path: CriticalPath,
    energy: float,
    lagrangian: Callable | None = None,
    momentum: Callable | None = None,
) -> float:
    """max over segments of |p . xdot - L - E|, velocities by finite differences.

    Defaults: L = pi |xdot|^2, p = 2 pi xdot.
    """
    if len(path.times) < 2:
        return abs(energy) if energy else 0.0
    L = lagrangian or (lambda v: math.pi * float(v @ v))
    P = momentum or _lagrangian_grad
    vel = np.diff(path.nodes, axis=0) / np.diff(path.times)[:, None]
    return max(abs(float(P(v) @ v) - L(v) - energy) for v in vel)
