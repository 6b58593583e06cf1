"""Finite-dimensional reductions of the Gaussian, Dirac, Hermite and gamma integrators.

Conventions
-----------
Gaussian: a set of k linear forms u = (<x'_1, x>, ..., <x'_k, x>) with
covariance descriptor W reduces to the density

    |det sW|^(-1/2) exp(-(pi / s) u^T W^-1 u) du,

i.e. a centered normal law with covariance (s / 2 pi) W. Its Fourier
transform at u' is exp(-pi s u'^T W u').

Gamma (line contour): the reduced integral of F is

    int_0^inf F(u) exp(omega u) u^(nu - 1) / Gamma(nu) du,

which equals (-omega)^(-nu) for F = 1. ``normalized=True`` divides that out,
giving the expectation of F under the gamma(nu, -omega) law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import hermite as _herm
from numpy.polynomial import hermite_e as _herme
from scipy import integrate, special as _sp

from .special import lower_incomplete_gamma_kummer

__all__ = [
    "IntegratorError",
    "QuadratureError",
    "DivergenceError",
    "GaussianSpec",
    "GammaSpec",
    "HermiteSpec",
    "gaussian_reduce",
    "gaussian_covariance",
    "brownian_forms",
    "gaussian_samples",
    "SteinResult",
    "gaussian_stein_residual",
    "dirac_compose",
    "narrow_gaussian_delta",
    "DiracCheck",
    "dirac_limit_check",
    "hermite_density",
    "hermite_reduce",
    "normal_ordered",
    "normal_ordered_moment",
    "normal_ordered_moment_quadrature",
    "hermite_generating_terms",
    "gamma_normalize",
    "gamma_moment",
    "gamma_reduce",
    "dtau_reduce",
    "HERMITE_MAX_ORDER",
]

HERMITE_MAX_ORDER = 20


class IntegratorError(ValueError):
    pass


class QuadratureError(IntegratorError, ArithmeticError):
    pass


class DivergenceError(QuadratureError):
    pass


# --------------------------------------------------------------------------
# Gaussian
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Diffusion scale ``s`` and covariance descriptor ``W`` over k linear forms."""

    s: float = 2 * math.pi
    W: np.ndarray = field(default_factory=lambda: np.eye(1))

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        object.__setattr__(self, "W", W)
        if np.iscomplexobj(self.s) or not self.s > 0:
            raise IntegratorError("only real positive s is supported")
        if W.shape[0] != W.shape[1]:
            raise IntegratorError("W must be square")
        if not np.allclose(W, W.T, atol=1e-12, rtol=0):
            raise IntegratorError("W must be symmetric")
        try:
            np.linalg.cholesky(W)
        except np.linalg.LinAlgError:
            raise IntegratorError("covariance W is not positive definite") from None
        Q = np.linalg.inv(W)
        if np.max(np.abs(Q @ W - np.eye(W.shape[0]))) > 1e-10:
            raise IntegratorError("W is too ill-conditioned: Q W differs from the identity")
        object.__setattr__(self, "_Q", Q)

    @property
    def k(self) -> int:
        return self.W.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self._Q

    @property
    def covariance(self) -> np.ndarray:
        return self.s / (2 * math.pi) * self.W

    def density(self, u):
        """The reduced density at points ``(n, k)``."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        quad = np.einsum("ni,ij,nj->n", u, self.Q, u)
        det = abs(np.linalg.det(self.s * self.W))
        return det**-0.5 * np.exp(-(math.pi / self.s) * quad)


def brownian_forms(times) -> np.ndarray:
    """W for the point evaluations z(t_1), ..., z(t_k) of a pinned path: min(t_i, t_j)."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise IntegratorError("times must be non-negative")
    return np.minimum.outer(t, t)


def gaussian_covariance(spec: GaussianSpec, t: float, u: float, dim: int | None = None) -> np.ndarray:
    """(s / 2 pi) delta^{ab} min(t, u): covariance of z^a(t), z^b(u)."""
    if t < 0 or u < 0:
        raise IntegratorError("times must be non-negative")
    d = spec.k if dim is None else dim
    return spec.s / (2 * math.pi) * min(t, u) * np.eye(d)


def _tensor_nodes(order: int, k: int):
    x, w = _herme.hermegauss(order)
    w = w / math.sqrt(2 * math.pi)
    grids = np.meshgrid(*([x] * k), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * k), indexing="ij")
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    return pts, weights


def gaussian_reduce(
    spec: GaussianSpec,
    F: Callable,
    dual=None,
    tol: float = 1e-9,
    max_points: int = 2_000_000,
):
    """Integrate ``F(u)`` (vectorized, ``(n, k) -> (n,)``) against the reduced Gaussian.

    With ``dual`` = u' the integrand carries the factor exp(-2 pi i <u', u>).
    W is diagonalized and a tensor Gauss-Hermite rule is refined by doubling
    its order until two successive values agree to ``tol`` relative to the
    integral of |F|.
    """
    k = spec.k
    if k > 8:
        raise IntegratorError("at most 8 linear forms are supported")
    lam, V = np.linalg.eigh(spec.covariance)
    A = V * np.sqrt(lam)  # u = A g, g standard normal
    dual_vec = None if dual is None else np.asarray(dual, dtype=float).reshape(k)

    def estimate(order):
        g, w = _tensor_nodes(order, k)
        u = g @ A.T
        vals = np.asarray(F(u))
        if dual_vec is not None:
            vals = vals * np.exp(-2j * math.pi * (u @ dual_vec))
        vals = np.broadcast_to(vals, w.shape)
        return np.sum(w * vals), np.sum(w * np.abs(vals))

    order = 8
    prev, _ = estimate(order)
    while True:
        order *= 2
        if order**k > max_points:
            raise QuadratureError(
                f"Gaussian quadrature did not reach relative tolerance {tol} within {max_points} nodes"
            )
        cur, scale = estimate(order)
        if abs(cur - prev) <= tol * max(scale, 1e-300):
            return cur.real if np.isrealobj(cur) or abs(cur.imag) == 0 else cur
        prev = cur


def gaussian_samples(spec: GaussianSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Samples ``(n, k)`` of the reduced Gaussian (covariance (s / 2 pi) W)."""
    L = np.linalg.cholesky(spec.covariance)
    return rng.standard_normal((n, spec.k)) @ L.T


@dataclass(frozen=True)
class SteinResult:
    lhs: np.ndarray  # E[grad F(u)]
    rhs: np.ndarray  # (2 pi / s) W^-1 E[u F(u)]
    residual: np.ndarray
    stderr: np.ndarray
    n: int

    def within(self, k_se: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.residual) <= k_se * self.stderr))


def gaussian_stein_residual(
    spec: GaussianSpec,
    F: Callable,
    grad_F: Callable,
    n_samples: int = 100_000,
    seed: int = 0,
) -> SteinResult:
    """Monte Carlo check of the Gaussian integration-by-parts identity
    E[grad F(u)] = (2 pi / s) W^-1 E[u F(u)].

    ``F``: ``(n, k) -> (n,)``; ``grad_F``: ``(n, k) -> (n, k)``. The residual
    is estimated from per-sample differences, so its standard error already
    accounts for the correlation between the two sides.
    """
    if n_samples < 1000:
        raise IntegratorError("sample budget must be at least 1000")
    rng = np.random.default_rng(seed)
    u = gaussian_samples(spec, n_samples, rng)
    a = np.asarray(grad_F(u), dtype=float).reshape(n_samples, spec.k)
    b = (2 * math.pi / spec.s) * (u @ spec.Q.T) * np.asarray(F(u), dtype=float).reshape(-1, 1)
    diff = a - b
    return SteinResult(
        lhs=a.mean(axis=0),
        rhs=b.mean(axis=0),
        residual=diff.mean(axis=0),
        stderr=diff.std(axis=0, ddof=1) / math.sqrt(n_samples),
        n=n_samples,
    )


# --------------------------------------------------------------------------
# Dirac
# --------------------------------------------------------------------------


def _jacobian_fd(M, x0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    k = x0.size
    J = np.empty((k, k))
    for j in range(k):
        h = 1e-6 * (1.0 + abs(x0[j]))
        e = np.zeros(k)
        e[j] = h
        J[:, j] = (np.asarray(M(x0 + e), dtype=float).reshape(k) - np.asarray(M(x0 - e), dtype=float).reshape(k)) / (2 * h)
    return J


def dirac_compose(F: Callable, M: Callable, roots, jacobian: Callable | None = None, root_tol: float = 1e-8):
    """sum over the zeros x0 of M of |det M'(x0)|^-1 F(x0).

    ``F`` and ``M`` act on single points ``(k,)``. ``roots`` must list every
    zero of M; each is checked to vanish to ``root_tol``. The Jacobian is
    taken from ``jacobian`` when given, otherwise by central differences.
    """
    total = 0.0
    for r in roots:
        x0 = np.atleast_1d(np.asarray(r, dtype=float))
        if np.max(np.abs(np.atleast_1d(M(x0)))) > root_tol:
            raise IntegratorError(f"{x0} is not a zero of M")
        J = np.atleast_2d(jacobian(x0)) if jacobian is not None else _jacobian_fd(M, x0)
        det = abs(np.linalg.det(J))
        if det < 1e-12:
            raise IntegratorError(f"singular Jacobian at root {x0}")
        total = total + np.asarray(F(x0)) / det
    return total


def narrow_gaussian_delta(F: Callable, M: Callable, s: float, roots, halfwidth: float = 40.0):
    """1-D check integral int F(x) |s|^(-1/2) exp(-pi M(x)^2 / s) dx.

    This is the Gaussian of width s that tends to delta(M(x)) as s -> 0.
    The integral is restricted to windows around the listed roots wide enough
    that the neglected mass is below exp(-pi * halfwidth^2 / 4).
    """
    if not s > 0:
        raise IntegratorError("s must be positive")
    windows = []
    for r in roots:
        x0 = float(np.atleast_1d(r)[0])
        slope = abs(_jacobian_fd(lambda x: np.atleast_1d(M(x[0])), [x0])[0, 0])
        if slope < 1e-12:
            raise IntegratorError(f"singular Jacobian at root {x0}")
        w = halfwidth * math.sqrt(s) / slope
        windows.append([x0 - w, x0 + w, [x0]])
    windows.sort(key=lambda item: item[0])
    merged = [windows[0]]
    for lo, hi, pts in windows[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
            merged[-1][2] += pts
        else:
            merged.append([lo, hi, pts])

    def integrand(x):
        return float(F(x)) * s**-0.5 * math.exp(-math.pi * float(M(x)) ** 2 / s)

    total = 0.0
    for lo, hi, pts in merged:
        val, _ = integrate.quad(integrand, lo, hi, points=pts, limit=400, epsabs=0, epsrel=1e-12)
        total += val
    return total


@dataclass(frozen=True)
class DiracCheck:
    exact: float
    widths: tuple
    values: tuple
    errors: tuple
    richardson: tuple  # extrapolations from successive widths, assuming O(s) error

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def dirac_limit_check(F, M, roots, widths=(1e-2, 1e-3, 1e-4)) -> DiracCheck:
    """Compare the composition formula with narrow-Gaussian quadrature (1-D)."""
    exact = float(dirac_compose(lambda x: F(x[0]), lambda x: np.atleast_1d(M(x[0])), [[r] for r in roots]))
    vals = tuple(narrow_gaussian_delta(F, M, s, roots) for s in widths)
    errs = tuple(abs(v - exact) for v in vals)
    rich = []
    for (s1, v1), (s2, v2) in zip(zip(widths, vals), zip(widths[1:], vals[1:])):
        rich.append((s1 * v2 - s2 * v1) / (s1 - s2))
    return DiracCheck(exact, tuple(widths), vals, errs, tuple(rich))


# --------------------------------------------------------------------------
# Hermite
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HermiteSpec:
    """Order n, scale s and the scalar W(z') of the reducing linear form."""

    n: int
    s: float = 1.0
    W: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise IntegratorError("Hermite order must be a non-negative integer")
        if self.n > HERMITE_MAX_ORDER:
            raise IntegratorError(f"Hermite order is capped at {HERMITE_MAX_ORDER}")
        if not self.s > 0 or not self.W > 0:
            raise IntegratorError("s and W must be positive")

    @property
    def c(self) -> float:
        """pi s W, the natural unit of the normal-ordered moments."""
        return math.pi * self.s * self.W


def _hermite_poly(n, y):
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return _herm.hermval(y, coef)


def hermite_density(spec: HermiteSpec, u):
    """The 1-D reduction of D rho_{n,s} at u."""
    u = np.asarray(u, dtype=float)
    sw = spec.s * spec.W
    y = math.sqrt(math.pi / sw) * u
    pref = (spec.c / 2) ** (spec.n / 2) * sw**-0.5
    return pref * _hermite_poly(spec.n, y) * np.exp(-y * y)


def hermite_reduce(spec: HermiteSpec, F: Callable, tol: float = 1e-12, max_order: int = 512):
    """int F(u) d rho_{n,s}(u) in its 1-D reduced form, by Gauss-Hermite quadrature.

    ``F`` is vectorized over u. The order is doubled until two successive
    values agree to ``tol`` relative to the integral of |F H_n|.
    """
    sw = spec.s * spec.W
    scale_u = math.sqrt(sw / math.pi)
    pref = (spec.c / 2) ** (spec.n / 2) / math.sqrt(math.pi)

    def estimate(order):
        y, w = _herm.hermgauss(order)
        vals = np.asarray(F(scale_u * y), dtype=float) * _hermite_poly(spec.n, y)
        return pref * np.sum(w * vals), pref * np.sum(w * np.abs(vals))

    order = max(16, 2 * spec.n + 8)
    prev, _ = estimate(order)
    while order < max_order:
        order *= 2
        cur, scale = estimate(order)
        if abs(cur - prev) <= tol * max(scale, 1e-300):
            return float(cur)
        prev = cur
    raise QuadratureError("Hermite quadrature did not converge")


def normal_ordered(spec: HermiteSpec, m: int) -> Callable:
    """The normal-ordered monomial :u^m: = |pi s W / 2|^(m/2) H_m(sqrt(pi / (s W)) u)."""
    if m < 0:
        raise IntegratorError("order must be non-negative")
    sw = spec.s * spec.W
    pref = (spec.c / 2) ** (m / 2)
    k = math.sqrt(math.pi / sw)
    return lambda u: pref * _hermite_poly(m, k * np.asarray(u, dtype=float))


def normal_ordered_moment(spec: HermiteSpec, m: int) -> float:
    """Closed form |pi s W|^m n! delta_{nm}."""
    if m < 0 or m > 12 or spec.n > 12:
        raise IntegratorError("normal-ordered moments are supported for m, n <= 12")
    if m != spec.n:
        return 0.0
    return abs(spec.c) ** m * math.factorial(m)


def normal_ordered_moment_quadrature(spec: HermiteSpec, m: int) -> float:
    return hermite_reduce(spec, normal_ordered(spec, m))


def hermite_generating_terms(s: float, W: float, n_max: int):
    """Terms (1/n!) int :exp(u): d rho_{n,s} for n = 0..n_max.

    :exp(u): is truncated at order n_max, which is exact for every n <= n_max
    by orthogonality. Returns ``(quadrature_terms, closed_form_terms,
    taylor_terms)``; the Taylor terms are those of exp(pi s W).
    """
    quad, closed, taylor = [], [], []
    for n in range(n_max + 1):
        spec = HermiteSpec(n, s, W)
        mons = [normal_ordered(spec, m) for m in range(n_max + 1)]

        def wick_exp(u, mons=mons):
            return sum(f(u) / math.factorial(m) for m, f in enumerate(mons))

        quad.append(hermite_reduce(spec, wick_exp) / math.factorial(n))
        closed.append(normal_ordered_moment(spec, n) / math.factorial(n) / math.factorial(n))
        taylor.append(spec.c**n / math.factorial(n))
    return quad, closed, taylor


# --------------------------------------------------------------------------
# gamma
# --------------------------------------------------------------------------

CONTOURS = ("real", "imaginary", "circle")


@dataclass(frozen=True)
class GammaSpec:
    """omega, nu and the contour: ``real`` (positive axis), ``imaginary`` or ``circle``."""

    omega: complex
    nu: complex
    contour: str = "real"

    def __post_init__(self):
        if self.contour not in CONTOURS:
            raise IntegratorError(f"contour must be one of {CONTOURS}")
        if not np.real(-self.omega) > 0:
            raise IntegratorError("parameter domain violated: need Re(-omega) > 0")
        if not np.real(self.nu) > 0:
            raise IntegratorError("parameter domain violated: need Re(nu) > 0")
        if self.contour == "imaginary" and not np.real(self.nu) < 1:
            raise IntegratorError("imaginary contour needs 0 < Re(nu) < 1 for convergence")

    @property
    def is_real(self) -> bool:
        return np.imag(self.omega) == 0 and np.imag(self.nu) == 0


def _cpow(base, expo):
    if np.imag(base) == 0 and np.imag(expo) == 0 and np.real(base) > 0:
        return float(np.real(base)) ** float(np.real(expo))
    return complex(base) ** complex(expo)


def _gamma_fn(z):
    if np.imag(z) == 0:
        return math.gamma(float(np.real(z)))
    return complex(_sp.gamma(complex(z)))


def _circle_gamma(nu: float, omega: float) -> float:
    return lower_incomplete_gamma_kummer(float(nu), float(-omega))


def gamma_normalize(spec: GammaSpec):
    """Total mass of the reduced gamma integrator.

    Line contours: (-omega)^(-nu). Circle: (1 - e^omega) (-omega)^(-nu), the
    F = 1 value of the circle reduction.
    """
    base = _cpow(-spec.omega, -spec.nu)
    if spec.contour == "circle":
        if not spec.is_real:
            raise IntegratorError("circle contour supports real parameters only")
        return (1.0 - math.exp(float(np.real(spec.omega)))) * base
    return base


def gamma_moment(spec: GammaSpec, rho):
    """int tau(t_b)^rho D gamma: Gamma(nu + rho) / Gamma(nu) (-omega)^-(nu + rho) on a line,
    gamma(nu + rho, -omega) / gamma(nu, -omega) times the circle normalization at nu + rho."""
    if not np.real(spec.nu + rho) > 0:
        raise IntegratorError("parameter domain violated: need Re(nu + rho) > 0")
    shifted = GammaSpec(spec.omega, spec.nu + rho, "real" if spec.contour == "imaginary" else spec.contour)
    if spec.contour == "circle":
        if np.imag(rho) != 0:
            raise IntegratorError("circle contour supports real rho only")
        ratio = _circle_gamma(spec.nu + rho, spec.omega) / _circle_gamma(spec.nu, spec.omega)
        return ratio * gamma_normalize(shifted)
    return _gamma_fn(spec.nu + rho) / _gamma_fn(spec.nu) * gamma_normalize(shifted)


def _quad_complex(fn, a, b, **kw):
    def re(x):
        return float(np.real(fn(x)))

    def im(x):
        return float(np.imag(fn(x)))

    out = []
    for part in (re, im):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(part, a, b, limit=500, **kw)
            except integrate.IntegrationWarning as exc:
                raise DivergenceError(f"quadrature failed: {exc}") from None
        if not math.isfinite(val):
            raise DivergenceError("divergent integrand")
        out.append(val)
    return complex(out[0], out[1])


def _real_line_integral(G, nu, omega):
    """int_0^inf G(u) u^(nu-1) e^(omega u) du for real nu > 0, omega < 0."""
    head = _quad_complex(
        lambda u: G(u) * math.exp(omega * u), 0.0, 1.0, weight="alg", wvar=(nu - 1.0, 0.0), epsabs=0, epsrel=1e-13
    )
    tail = _quad_complex(lambda u: G(u) * u ** (nu - 1.0) * math.exp(omega * u), 1.0, math.inf, epsabs=1e-300, epsrel=1e-13)
    return head + tail


def _fourier_half_line(G, nu, freq):
    """int_0^inf G(y) y^(nu-1) e^(i freq y) dy for 0 < nu < 1, freq != 0."""
    head = _quad_complex(
        lambda y: G(y) * complex(math.cos(freq * y), math.sin(freq * y)),
        0.0,
        1.0,
        weight="alg",
        wvar=(nu - 1.0, 0.0),
        epsabs=0,
        epsrel=1e-12,
    )
    w = abs(freq)
    sgn = 1.0 if freq > 0 else -1.0
    parts = {}
    for kind in ("cos", "sin"):
        for comp in ("re", "im"):
            def h(y, comp=comp):
                v = G(y) * y ** (nu - 1.0)
                return float(np.real(v) if comp == "re" else np.imag(v))

            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, _ = integrate.quad(h, 1.0, math.inf, weight=kind, wvar=w, limlst=200)
                except integrate.IntegrationWarning as exc:
                    raise DivergenceError(f"oscillatory quadrature failed: {exc}") from None
            parts[kind, comp] = val
    # G y^(nu-1) (cos + i sgn sin)
    c = complex(parts["cos", "re"], parts["cos", "im"])
    s = complex(parts["sin", "re"], parts["sin", "im"])
    return head + c + 1j * sgn * s


def gamma_reduce(spec: GammaSpec, F: Callable, normalized: bool = False):
    """Contour quadrature of F against the reduced gamma integrator.

    ``F`` takes a scalar (complex on the imaginary contour). Real parameters only.
    """
    if not spec.is_real:
        raise IntegratorError("quadrature supports real omega and nu only")
    omega, nu = float(np.real(spec.omega)), float(np.real(spec.nu))
    if spec.contour == "real":
        val = _real_line_integral(F, nu, omega) / math.gamma(nu)
    elif spec.contour == "circle":
        head = _quad_complex(
            lambda u: F(u) * math.exp(omega * u), 0.0, 1.0, weight="alg", wvar=(nu - 1.0, 0.0), epsabs=0, epsrel=1e-13
        )
        val = (1.0 - math.exp(omega)) * head / _circle_gamma(nu, omega)
    else:
        # u = i y on the upper half and u = -i y on the lower half
        up = (1j) ** nu * _fourier_half_line(lambda y: F(1j * y), nu, omega)
        down = (-1j) ** nu * _fourier_half_line(lambda y: F(-1j * y), nu, -omega)
        val = 0.5 * (up + down) / math.gamma(nu)
    if normalized:
        val = val / gamma_normalize(spec)
    if isinstance(val, complex) and abs(val.imag) <= 1e-13 * max(abs(val.real), 1e-300):
        return val.real
    return val


def dtau_reduce(
    F: Callable,
    normalization: float = 1.0,
    contour: str = "real",
    tol: float = 1e-10,
    max_log_range: float = 320.0,
):
    """N * int_{C+} F(t) d(ln t), with C+ the positive real or imaginary axis.

    Computed in y = ln|t| over a window [-Y, Y] that doubles until the two
    end slabs stop contributing; if either keeps contributing the integral
    is declared divergent at that end.
    """
    if contour not in ("real", "imaginary"):
        raise IntegratorError("contour must be 'real' or 'imaginary'")
    unit = 1.0 if contour == "real" else 1j

    def g(y):
        return F(unit * math.exp(y))

    def piece(a, b):
        if unit == 1.0:
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    v, _ = integrate.quad(lambda y: float(np.real(g(y))), a, b, limit=400, epsabs=0, epsrel=1e-12)
                    vi, _ = integrate.quad(lambda y: float(np.imag(g(y))), a, b, limit=400, epsabs=0, epsrel=1e-12)
                except integrate.IntegrationWarning as exc:
                    raise DivergenceError(f"quadrature failed: {exc}") from None
            return complex(v, vi)
        return _quad_complex(g, a, b, epsabs=0, epsrel=1e-12)

    Y = 10.0
    total = piece(-Y, Y)
    while True:
        if 2 * Y > max_log_range:
            left = abs(g(-Y))
            right = abs(g(Y))
            end = "t -> 0" if left >= right else "t -> infinity"
            raise DivergenceError(f"d(ln t) integral diverges at {end}")
        lo = piece(-2 * Y, -Y)
        hi = piece(Y, 2 * Y)
        total = total + lo + hi
        scale = max(abs(total), 1e-300)
        if abs(lo) <= tol * scale and abs(hi) <= tol * scale and abs(g(-2 * Y)) <= tol * scale and abs(g(2 * Y)) <= tol * scale:
            break
        Y *= 2
    val = normalization * total
    if abs(val.imag) <= 1e-14 * max(abs(val.real), 1e-300):
        return val.real
    return val
