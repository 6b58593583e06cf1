"""Domains, fields and problem descriptions shared by every estimator.

The generator realized by all estimators is

    L = (s / 4 pi) * sum_a (X_a . grad)^2 + Y . grad + V

for scalar fields, with the second-order part taken in Ito form
(X_a^i X_a^j d_i d_j). With orthonormal X and s = 2 pi, or X = sqrt(2 pi) e_a
and s = 1, this is L = Laplacian / 2 + V.

Note the sign of the potential: paths are weighted by exp(+int V dt), so a
dissipative problem has V < 0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import expr as _expr

__all__ = [
    "ConfigError",
    "Domain",
    "interval",
    "box",
    "ball",
    "annulus",
    "half_space",
    "full_space",
    "signed_distance",
    "ScalarField",
    "VectorField",
    "CriticalDistance",
    "FixedEnergy",
    "StochasticBaseline",
    "ExitTimeStrategy",
    "TimeGrid",
    "ProblemSpec",
    "make_problem",
    "load_problem",
    "scalar_field",
    "vector_field",
]

GRAM_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid problem configuration."""


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

SHAPES = ("interval", "box", "ball", "annulus", "half_space", "full_space")


@dataclass(frozen=True, eq=False)
class Domain:
    """A built-in region of R^m described by its signed distance.

    ``distance`` is negative inside, zero on the boundary and positive outside.
    """

    shape: str
    dimension: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}")
        if self.dimension < 1:
            raise ConfigError("dimension must be a positive integer")

    # -- geometry ---------------------------------------------------------

    @property
    def bounded(self) -> bool:
        return self.shape in ("interval", "box", "ball", "annulus")

    @property
    def has_boundary(self) -> bool:
        return self.shape != "full_space"

    def distance(self, x):
        """Signed distance for a point ``(m,)`` or batch ``(n, m)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        self._check_dim(pts)
        p = self.params
        if self.shape == "interval":
            a, b = p["a"], p["b"]
            d = np.maximum(a - pts[:, 0], pts[:, 0] - b)
        elif self.shape == "box":
            lo, hi = np.asarray(p["lo"]), np.asarray(p["hi"])
            q = np.maximum(lo - pts, pts - hi)
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            d = outside + inside
        elif self.shape == "ball":
            r = np.linalg.norm(pts - np.asarray(p["center"]), axis=1)
            d = r - p["radius"]
        elif self.shape == "annulus":
            r = np.linalg.norm(pts - np.asarray(p["center"]), axis=1)
            d = np.maximum(p["inner"] - r, r - p["outer"])
        elif self.shape == "half_space":
            d = p["offset"] - pts @ np.asarray(p["normal"])
        else:
            d = np.full(pts.shape[0], -np.inf)
        return float(d[0]) if single else d

    def inward_normal(self, x):
        """Unit normal pointing into the domain (minus the distance gradient)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        self._check_dim(pts)
        p = self.params
        if self.shape == "interval":
            mid = 0.5 * (p["a"] + p["b"])
            n = np.where(pts[:, :1] <= mid, 1.0, -1.0)
        elif self.shape == "box":
            lo, hi = np.asarray(p["lo"]), np.asarray(p["hi"])
            q = np.maximum(lo - pts, pts - hi)
            n = np.zeros_like(pts)
            outside = np.maximum(q, 0.0)
            norm = np.linalg.norm(outside, axis=1)
            sign = np.where(lo - pts > pts - hi, 1.0, -1.0)  # inward along each axis
            for i in range(pts.shape[0]):
                if norm[i] > 0:
                    n[i] = sign[i] * outside[i] / norm[i]
                else:
                    k = int(np.argmax(q[i]))
                    n[i, k] = sign[i, k]
        elif self.shape in ("ball", "annulus"):
            c = np.asarray(p["center"])
            v = pts - c
            r = np.linalg.norm(v, axis=1, keepdims=True)
            if np.any(r == 0):
                raise ValueError("normal undefined at the center")
            u = v / r
            if self.shape == "ball":
                n = -u
            else:
                near_inner = (r[:, 0] - p["inner"]) < (p["outer"] - r[:, 0])
                n = np.where(near_inner[:, None], u, -u)
        elif self.shape == "half_space":
            n = np.broadcast_to(np.asarray(p["normal"], dtype=float), pts.shape).copy()
        else:
            raise ValueError("full space has no boundary")
        return n[0] if single else n

    def project(self, x):
        """Nearest boundary point(s) of a single point ``(m,)``.

        Returns an array ``(k, m)`` of all nearest points; k > 1 on ties
        (midpoint of an interval, center of a ball, ...). At a ball center
        the tie set is a sphere, represented by the 2m axis points.
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check_dim(x[None, :])
        p = self.params
        tie = 1e-12
        if self.shape == "interval":
            a, b = p["a"], p["b"]
            da, db = abs(x[0] - a), abs(b - x[0])
            if abs(da - db) <= tie * max(1.0, abs(b - a)):
                return np.array([[a], [b]])
            return np.array([[a]]) if da < db else np.array([[b]])
        if self.shape == "half_space":
            n = np.asarray(p["normal"], dtype=float)
            return (x - (x @ n - p["offset"]) * n)[None, :]
        if self.shape in ("ball", "annulus"):
            c = np.asarray(p["center"], dtype=float)
            v = x - c
            r = np.linalg.norm(v)
            if self.shape == "ball":
                radii = [p["radius"]]
            else:
                di, do = abs(r - p["inner"]), abs(p["outer"] - r)
                if abs(di - do) <= tie:
                    radii = [p["inner"], p["outer"]]
                else:
                    radii = [p["inner"] if di < do else p["outer"]]
            if r <= tie:
                eye = np.eye(self.dimension)
                dirs = np.concatenate([eye, -eye])
            else:
                dirs = (v / r)[None, :]
            return np.array([c + rad * u for rad in radii for u in dirs])
        if self.shape == "box":
            lo, hi = np.asarray(p["lo"], dtype=float), np.asarray(p["hi"], dtype=float)
            y = np.clip(x, lo, hi)
            if np.any(x != y):
                return y[None, :]
            gaps = np.concatenate([x - lo, hi - x])
            best = gaps.min()
            out = []
            for k in np.flatnonzero(gaps <= best + tie):
                z = x.copy()
                axis = k % self.dimension
                z[axis] = lo[axis] if k < self.dimension else hi[axis]
                out.append(z)
            return np.array(out)
        raise ValueError("full space has no boundary")

    def normal_candidates(self, x):
        """All boundary points reached by a straight segment meeting the
        boundary orthogonally (the critical-path candidates), nearest first."""
        x = np.asarray(x, dtype=float).reshape(-1)
        p = self.params
        if self.shape == "interval":
            pts = np.array([[p["a"]], [p["b"]]])
        elif self.shape in ("ball", "annulus"):
            c = np.asarray(p["center"], dtype=float)
            v = x - c
            r = np.linalg.norm(v)
            if r <= 1e-12:
                return self.project(x)
            u = v / r
            radii = [p["radius"]] if self.shape == "ball" else [p["inner"], p["outer"]]
            pts = np.array([c + s * rad * u for rad in radii for s in (1.0, -1.0)])
            if self.shape == "annulus":
                # the inner circle is only reachable on the near side
                pts = np.array([c + p["inner"] * u, c + p["outer"] * u, c - p["outer"] * u])
        elif self.shape == "box":
            lo, hi = np.asarray(p["lo"], dtype=float), np.asarray(p["hi"], dtype=float)
            out = []
            for axis in range(self.dimension):
                for bound in (lo[axis], hi[axis]):
                    z = x.copy()
                    z[axis] = bound
                    out.append(z)
            pts = np.array(out)
        else:
            return self.project(x)
        dist = np.linalg.norm(pts - x, axis=1)
        return pts[np.argsort(dist, kind="stable")]

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.0):
        """Uniform-ish interior samples; unbounded shapes use a window of width 4."""
        p = self.params
        m = self.dimension
        if self.shape == "interval":
            a, b = p["a"] + margin, p["b"] - margin
            return rng.uniform(a, b, size=(count, 1))
        if self.shape == "box":
            lo, hi = np.asarray(p["lo"]) + margin, np.asarray(p["hi"]) - margin
            return rng.uniform(lo, hi, size=(count, m))
        if self.shape in ("ball", "annulus"):
            c = np.asarray(p["center"], dtype=float)
            r_in = 0.0 if self.shape == "ball" else p["inner"] + margin
            r_out = (p["radius"] if self.shape == "ball" else p["outer"]) - margin
            g = rng.standard_normal((count, m))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            u = rng.uniform(size=count)
            r = (r_in**m + u * (r_out**m - r_in**m)) ** (1.0 / m)
            return c + g * r[:, None]
        if self.shape == "half_space":
            n = np.asarray(p["normal"], dtype=float)
            base = p["offset"] * n
            pts = base + rng.uniform(-2.0, 2.0, size=(count, m))
            depth = pts @ n - p["offset"]
            pts += np.where(depth < margin, margin - depth + np.abs(depth), 0.0)[:, None] * n
            return pts
        return rng.uniform(-2.0, 2.0, size=(count, m))

    def contains(self, x, tol: float = 1e-12) -> bool:
        """True for points of the closure."""
        return bool(self.distance(np.asarray(x, dtype=float).reshape(-1)) <= tol)

    @property
    def extent(self) -> float:
        """A characteristic size (diameter for bounded shapes)."""
        p = self.params
        if self.shape == "interval":
            return p["b"] - p["a"]
        if self.shape == "box":
            return float(np.max(np.asarray(p["hi"]) - np.asarray(p["lo"])))
        if self.shape == "ball":
            return 2.0 * p["radius"]
        if self.shape == "annulus":
            return 2.0 * p["outer"]
        return math.inf

    def _check_dim(self, pts):
        if pts.shape[-1] != self.dimension:
            raise ValueError(
                f"point dimension {pts.shape[-1]} does not match domain dimension {self.dimension}"
            )

    def describe(self) -> dict:
        return {"shape": self.shape, "params": _jsonable(self.params)}


def interval(a: float, b: float) -> Domain:
    if not b > a:
        raise ConfigError("interval needs a < b")
    return Domain("interval", 1, {"a": float(a), "b": float(b)})


def box(lo, hi) -> Domain:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo):
        raise ConfigError("box needs lo < hi componentwise")
    return Domain("box", lo.size, {"lo": lo.tolist(), "hi": hi.tolist()})


def ball(center, radius: float) -> Domain:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if radius <= 0:
        raise ConfigError("ball radius must be positive")
    return Domain("ball", center.size, {"center": center.tolist(), "radius": float(radius)})


def annulus(center, inner: float, outer: float) -> Domain:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if not 0 < inner < outer:
        raise ConfigError("annulus needs 0 < inner < outer")
    return Domain(
        "annulus", center.size, {"center": center.tolist(), "inner": float(inner), "outer": float(outer)}
    )


def half_space(normal, offset: float = 0.0) -> Domain:
    """The region {x : normal . x > offset}; ``normal`` is normalized."""
    n = np.atleast_1d(np.asarray(normal, dtype=float))
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ConfigError("half-space normal must be nonzero")
    return Domain(
        "half_space", n.size, {"normal": (n / norm).tolist(), "offset": float(offset) / norm}
    )


def full_space(dimension: int) -> Domain:
    return Domain("full_space", int(dimension), {})


def signed_distance(domain: Domain, x) -> float:
    return domain.distance(x)


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------


def _fd_gradient(fn, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, m = pts.shape
    grad = np.empty((n, m))
    h = 1e-5 * (1.0 + np.abs(pts))
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        hi = h[:, i : i + 1]
        grad[:, i] = (fn(pts + hi * e) - fn(pts - hi * e)) / (2.0 * hi[:, 0])
    return grad


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Vectorized scalar field: ``(n, m) -> (n,)`` and ``(m,) -> float``."""

    fn: Callable
    dimension: int
    grad_fn: Callable | None = None
    provenance: str = "builtin"
    name: str = ""
    constant: float | None = None  # set when the field is known to be constant

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(np.asarray(self.fn(x[None, :])).reshape(-1)[0])
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), (x.shape[0],))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        g = self.grad_fn(pts) if self.grad_fn is not None else _fd_gradient(self.fn, pts)
        g = np.asarray(g, dtype=float).reshape(pts.shape)
        return g[0] if single else g

    def check_gradient(self, pts, rtol: float = 1e-6) -> float:
        """Max relative mismatch between the analytic and central-difference gradient."""
        if self.grad_fn is None:
            return 0.0
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        exact = np.asarray(self.grad_fn(pts), dtype=float).reshape(pts.shape)
        approx = _fd_gradient(self.fn, pts)
        scale = np.maximum(np.abs(exact), 1.0)
        return float(np.max(np.abs(exact - approx) / scale))

    def sup(self, pts) -> float:
        return float(np.max(np.abs(self(np.atleast_2d(pts)))))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vectorized vector field: ``(n, m) -> (n, m)``."""

    fn: Callable
    dimension: int
    name: str = ""
    constant: tuple | None = None  # set when the field is known to be constant

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        out = np.asarray(self.fn(pts), dtype=float)
        out = np.broadcast_to(out, pts.shape)
        if out.shape[-1] != self.dimension:
            raise ValueError("vector field output dimension does not match the domain")
        return out[0].copy() if single else out

    @property
    def is_zero(self) -> bool:
        return self.constant is not None and not any(self.constant)


def _constant_scalar(value: float, m: int, name: str = "constant") -> ScalarField:
    v = float(value)
    return ScalarField(
        lambda x: np.full(x.shape[0], v),
        m,
        grad_fn=lambda x: np.zeros_like(x),
        name=name,
        constant=v,
    )


def _builtin_scalar(name: str, params: dict, m: int) -> ScalarField:
    if name == "zero":
        return _constant_scalar(0.0, m, "zero")
    if name == "constant":
        return _constant_scalar(params.get("value", 0.0), m)
    if name == "linear":
        c = np.asarray(params.get("coeffs", [1.0] * m), dtype=float)
        b = float(params.get("offset", 0.0))
        if c.size != m:
            raise ConfigError("linear field: coeffs length does not match dimension")
        return ScalarField(lambda x: x @ c + b, m, lambda x: np.broadcast_to(c, x.shape), name=name)
    if name == "square_norm":
        c = np.asarray(params.get("center", [0.0] * m), dtype=float)
        a = float(params.get("scale", 1.0))
        return ScalarField(
            lambda x: a * np.sum((x - c) ** 2, axis=1), m, lambda x: 2 * a * (x - c), name=name
        )
    if name == "gaussian_bump":
        c = np.asarray(params.get("center", [0.0] * m), dtype=float)
        w = float(params.get("width", 1.0))
        amp = float(params.get("amplitude", 1.0))
        if params.get("normalized", False):
            amp = amp * (2 * math.pi * w * w) ** (-m / 2)
        if w <= 0:
            raise ConfigError("gaussian_bump width must be positive")

        def f(x):
            return amp * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * w * w))

        return ScalarField(f, m, lambda x: -(x - c) / (w * w) * f(x)[:, None], name=name)
    if name == "cosine":
        k = np.asarray(params.get("wavevector", [1.0] * m), dtype=float)
        ph = float(params.get("phase", 0.0))
        amp = float(params.get("amplitude", 1.0))
        return ScalarField(
            lambda x: amp * np.cos(x @ k + ph),
            m,
            lambda x: -amp * np.sin(x @ k + ph)[:, None] * k,
            name=name,
        )
    raise ConfigError(f"unknown builtin scalar field {name!r}")


def _builtin_vector(name: str, params: dict, m: int) -> VectorField:
    if name == "zero":
        return VectorField(lambda x: np.zeros_like(x), m, name, constant=(0.0,) * m)
    if name == "constant":
        v = np.asarray(params.get("vector", [0.0] * m), dtype=float)
        if v.size != m:
            raise ConfigError("constant vector field: length does not match dimension")
        return VectorField(lambda x: np.broadcast_to(v, x.shape), m, name, constant=tuple(v))
    if name == "basis":
        i = int(params.get("index", 1)) - 1
        if not 0 <= i < m:
            raise ConfigError("basis index out of range")
        v = np.zeros(m)
        v[i] = float(params.get("scale", 1.0))
        return VectorField(lambda x: np.broadcast_to(v, x.shape), m, f"e{i + 1}", constant=tuple(v))
    if name == "linear":
        a = np.asarray(params.get("matrix", np.eye(m)), dtype=float).reshape(m, m)
        b = np.asarray(params.get("offset", [0.0] * m), dtype=float)
        return VectorField(lambda x: x @ a.T + b, m, name)
    raise ConfigError(f"unknown builtin vector field {name!r}")


def scalar_field(entry, m: int) -> ScalarField:
    """Build a scalar field from ``{"builtin": ..., "params": ...}``, ``{"expr": ...}``,
    a number, or pass an existing field through."""
    if isinstance(entry, ScalarField):
        if entry.dimension != m:
            raise ConfigError("dimension mismatch in scalar field")
        return entry
    if isinstance(entry, (int, float)):
        return _constant_scalar(entry, m)
    if callable(entry):
        return ScalarField(entry, m, provenance="callable")
    if not isinstance(entry, dict):
        raise ConfigError(f"cannot build a scalar field from {entry!r}")
    if "expr" in entry:
        try:
            e = _expr.parse(str(entry["expr"]), m)
        except _expr.ExprSyntaxError as exc:
            raise ConfigError(str(exc)) from exc
        return ScalarField(lambda x: _expr.evaluate(e, x), m, provenance="expression", name=e.source)
    if "builtin" in entry:
        return _builtin_scalar(entry["builtin"], entry.get("params", {}), m)
    raise ConfigError("field entry needs 'builtin' or 'expr'")


def vector_field(entry, m: int, name: str = "") -> VectorField:
    if isinstance(entry, VectorField):
        if entry.dimension != m:
            raise ConfigError("dimension mismatch in vector field")
        return entry
    if isinstance(entry, dict) and "expr" in entry:
        texts = entry["expr"]
        if isinstance(texts, str):
            texts = [texts]
        if len(texts) != m:
            raise ConfigError(f"vector expression needs {m} components, got {len(texts)}")
        try:
            comps = [_expr.parse(str(t), m) for t in texts]
        except _expr.ExprSyntaxError as exc:
            raise ConfigError(str(exc)) from exc

        def f(x):
            return np.stack([_expr.evaluate(c, x) for c in comps], axis=-1)

        return VectorField(f, m, name or "expr")
    if isinstance(entry, dict) and "builtin" in entry:
        return _builtin_vector(entry["builtin"], entry.get("params", {}), m)
    if isinstance(entry, (list, tuple)) and all(isinstance(v, (int, float)) for v in entry):
        return _builtin_vector("constant", {"vector": list(entry)}, m)
    raise ConfigError(f"cannot build a vector field from {entry!r}")


# --------------------------------------------------------------------------
# exit strategies, time grids, problems
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalDistance:
    """Critical path at constant speed: exit time = distance / speed."""

    speed: float = 1.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ConfigError("CriticalDistance speed must be positive")


@dataclass(frozen=True)
class FixedEnergy:
    """Critical path of energy E for the density pi |xdot|^2: speed sqrt(E / pi)."""

    energy: float

    def __post_init__(self):
        if not self.energy > 0:
            raise ConfigError("FixedEnergy energy must be positive")

    @property
    def speed(self) -> float:
        return math.sqrt(self.energy / math.pi)


@dataclass(frozen=True)
class StochasticBaseline:
    """Per-path first exit time (the classical comparator, not a critical path)."""


ExitTimeStrategy = CriticalDistance | FixedEnergy | StochasticBaseline


def strategy_from_config(entry) -> ExitTimeStrategy:
    if entry is None:
        return CriticalDistance(1.0)
    if isinstance(entry, (CriticalDistance, FixedEnergy, StochasticBaseline)):
        return entry
    variant = str(entry.get("variant", "critical_distance")).lower().replace("-", "_")
    params = entry.get("params", {})
    if variant in ("critical_distance", "critical"):
        return CriticalDistance(float(params.get("speed", 1.0)))
    if variant in ("fixed_energy", "energy"):
        if "energy" not in params:
            raise ConfigError("FixedEnergy needs params.energy")
        return FixedEnergy(float(params["energy"]))
    if variant in ("stochastic_baseline", "baseline"):
        return StochasticBaseline()
    raise ConfigError(f"unknown exit strategy {variant!r}")


def strategy_to_config(strategy: ExitTimeStrategy) -> dict:
    if isinstance(strategy, CriticalDistance):
        return {"variant": "critical_distance", "params": {"speed": strategy.speed}}
    if isinstance(strategy, FixedEnergy):
        return {"variant": "fixed_energy", "params": {"energy": strategy.energy}}
    return {"variant": "stochastic_baseline", "params": {}}


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0 or not math.isfinite(self.horizon):
            raise ValueError("time grid horizon must be positive and finite")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("time grid needs a positive integer step count")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @classmethod
    def with_step(cls, horizon: float, dt: float) -> "TimeGrid":
        return cls(horizon, max(1, int(math.ceil(horizon / dt - 1e-9))))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    domain: Domain
    frame: tuple[VectorField, ...]
    drift: VectorField
    potential: ScalarField
    source: ScalarField
    boundary_data: ScalarField
    diffusion_scale: float = 2 * math.pi
    exit_strategy: ExitTimeStrategy = CriticalDistance(1.0)
    config: dict | None = None

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def increment_variance_rate(self) -> float:
        """Variance per unit time of each driving increment, s / (2 pi)."""
        return self.diffusion_scale / (2 * math.pi)

    def frame_matrix(self, x):
        """Frame evaluated at points ``(n, m)`` as an array ``(n, m, d)``."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if not self.frame:
            return np.zeros(pts.shape + (0,))
        return np.stack([X(pts) for X in self.frame], axis=-1)

    def diffusion_matrix(self, x):
        """Second-order coefficient a^{ij} = (s / 4 pi) sum_a X_a^i X_a^j, shape (n, m, m)."""
        F = self.frame_matrix(x)
        return (self.diffusion_scale / (4 * math.pi)) * np.einsum("nia,nja->nij", F, F)

    def replace(self, **changes) -> "ProblemSpec":
        fields_ = {
            "domain": self.domain,
            "frame": self.frame,
            "drift": self.drift,
            "potential": self.potential,
            "source": self.source,
            "boundary_data": self.boundary_data,
            "diffusion_scale": self.diffusion_scale,
            "exit_strategy": self.exit_strategy,
            "config": self.config,
        }
        m = self.dimension
        for key, value in changes.items():
            if key in ("potential", "source", "boundary_data"):
                value = scalar_field(value, m)
            elif key == "exit_strategy":
                value = strategy_from_config(value)
            fields_[key] = value
        if self.config is not None:
            cfg = dict(self.config)
            for key, value in changes.items():
                if key == "exit_strategy":
                    cfg[key] = strategy_to_config(fields_[key])
                elif key in ("potential", "source", "boundary_data") and not isinstance(
                    changes[key], ScalarField
                ):
                    cfg[key] = _jsonable(changes[key])
                else:
                    cfg[key] = {"override": getattr(value, "name", repr(value))}
            fields_["config"] = cfg
        spec = ProblemSpec(**fields_)
        _validate(spec)
        return spec

    def fingerprint(self) -> str:
        """Stable hash of the configuration (empty-config problems hash their repr)."""
        payload = json.dumps(self.config, sort_keys=True) if self.config is not None else repr(id(self))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _validate(spec: ProblemSpec) -> None:
    m = spec.dimension
    d = len(spec.frame)
    if d > m:
        raise ConfigError(f"frame has {d} fields but the domain dimension is {m}")
    if not spec.diffusion_scale > 0:
        raise ConfigError("diffusion scale must be positive")
    for X in spec.frame + (spec.drift,):
        if X.dimension != m:
            raise ConfigError("dimension mismatch between a vector field and the domain")
    for f in (spec.potential, spec.source, spec.boundary_data):
        if f.dimension != m:
            raise ConfigError("dimension mismatch between a scalar field and the domain")
    if d:
        rng = np.random.default_rng(12345)
        pts = spec.domain.sample(rng, 16)
        try:
            F = spec.frame_matrix(pts)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        gram = np.einsum("nia,nib->nab", F, F)
        dets = np.linalg.det(gram)
        if np.any(dets <= GRAM_TOL):
            raise ConfigError("degenerate frame: vector fields are linearly dependent")


def _domain_from_config(entry) -> Domain:
    if isinstance(entry, Domain):
        return entry
    if not isinstance(entry, dict) or "shape" not in entry:
        raise ConfigError("domain needs a 'shape'")
    shape = str(entry["shape"]).lower().replace("-", "_")
    p = entry.get("params", {})
    try:
        if shape == "interval":
            return interval(p.get("a", 0.0), p.get("b", 1.0))
        if shape == "box":
            return box(p["lo"], p["hi"])
        if shape == "ball":
            return ball(p["center"], p.get("radius", 1.0))
        if shape == "annulus":
            return annulus(p["center"], p["inner"], p["outer"])
        if shape == "half_space":
            return half_space(p["normal"], p.get("offset", 0.0))
        if shape == "full_space":
            return full_space(int(p["dimension"]))
    except KeyError as exc:
        raise ConfigError(f"domain {shape}: missing parameter {exc}") from exc
    raise ConfigError(f"unknown shape {shape!r}")


def make_problem(config: dict[str, Any]) -> ProblemSpec:
    """Validated problem from a structured description (see the README for the schema).

    Missing entries default to: frame = orthonormal basis, drift = 0,
    potential = 0, source = 0, boundary data = 0, s = 2 pi (so L = Laplacian/2),
    exit strategy = CriticalDistance(1).
    """
    if not isinstance(config, dict):
        raise ConfigError("problem configuration must be a mapping")
    domain = _domain_from_config(config.get("domain"))
    m = domain.dimension
    frame_cfg = config.get("frame")
    if frame_cfg is None:
        frame = tuple(_builtin_vector("basis", {"index": i + 1}, m) for i in range(m))
    else:
        frame = tuple(vector_field(e, m, f"X{i + 1}") for i, e in enumerate(frame_cfg))
    drift = vector_field(config.get("drift", {"builtin": "zero"}), m, "Y")
    s = config.get("diffusion_scale", 2 * math.pi)
    if not isinstance(s, (int, float)) or not s > 0:
        raise ConfigError("diffusion_scale must be a positive number")
    spec = ProblemSpec(
        domain=domain,
        frame=frame,
        drift=drift,
        potential=scalar_field(config.get("potential", 0.0), m),
        source=scalar_field(config.get("source", 0.0), m),
        boundary_data=scalar_field(config.get("boundary_data", 0.0), m),
        diffusion_scale=float(s),
        exit_strategy=strategy_from_config(config.get("exit_strategy")),
        config=_jsonable(
            {k: v for k, v in config.items() if not isinstance(v, (ScalarField, VectorField, Domain))}
        ),
    )
    _validate(spec)
    return spec


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return make_problem(config)
