"""Property checks over the integrator reductions, grouped by family."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import integrators as I

__all__ = ["Check", "CHECKS", "run_suite", "FAMILIES"]

FAMILIES = ("gaussian", "dirac", "hermite", "gamma")


@dataclass(frozen=True)
class Check:
    family: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _gaussian(fault: float) -> list[Check]:
    out = []
    spec = I.GaussianSpec(2 * math.pi, I.brownian_forms([0.25, 0.75, 1.0]))
    norm = I.gaussian_reduce(spec, lambda u: np.ones(len(u)))
    out.append(Check("gaussian", "normalization", abs(norm + fault - 1.0), 1e-10))
    mean = I.gaussian_reduce(spec, lambda u: u[:, 1])
    out.append(Check("gaussian", "zero mean", abs(mean), 1e-10))
    worst = 0.0
    for s in (1.0, 2 * math.pi, 5.0):
        sp = I.GaussianSpec(s, I.brownian_forms([0.25, 0.75]))
        cov = I.gaussian_reduce(sp, lambda u: u[:, 0] * u[:, 1])
        worst = max(worst, abs(cov - s / (2 * math.pi) * 0.25))
    out.append(Check("gaussian", "covariance (quadrature)", worst, 1e-10))
    rng = np.random.default_rng(7)
    n = 100_000
    sp = I.GaussianSpec(2 * math.pi, I.brownian_forms([0.25, 0.75]))
    u = I.gaussian_samples(sp, n, rng)
    prod = u[:, 0] * u[:, 1]
    se = prod.std(ddof=1) / math.sqrt(n)
    out.append(Check("gaussian", "covariance (sampled, in SE)", abs(prod.mean() - 0.25) / se, 4.0))
    one = I.GaussianSpec(2 * math.pi, [[1.0]])
    for label, F, G in (
        ("stein u", lambda u: u[:, 0], lambda u: np.ones_like(u)),
        ("stein u^2", lambda u: u[:, 0] ** 2, lambda u: 2 * u),
        ("stein exp", lambda u: np.exp(u[:, 0]), lambda u: np.exp(u)),
    ):
        r = I.gaussian_stein_residual(one, F, G, n, seed=11)
        out.append(Check("gaussian", f"{label} (in SE)", float(np.max(np.abs(r.residual) / r.stderr)), 4.0))
    return out


def _dirac(fault: float) -> list[Check]:
    out = []
    v = I.dirac_compose(lambda x: 3.0 + x[0], lambda x: x, [[0.0]])
    out.append(Check("dirac", "identity map", abs(v + fault - 3.0), 1e-12))
    v = I.dirac_compose(lambda x: 1.0, lambda x: 2 * x, [[0.0]])
    out.append(Check("dirac", "scaled map", abs(v - 0.5), 1e-9))
    chk = I.dirac_limit_check(lambda x: x * x, lambda x: x * x - 1, [-1.0, 1.0])
    out.append(Check("dirac", "narrow-gaussian final error", chk.errors[-1], 1e-3))
    out.append(Check("dirac", "monotone convergence", 0.0 if chk.monotone else 1.0, 0.5))
    return out


def _hermite(fault: float) -> list[Check]:
    out = []
    worst = 0.0
    for n in range(7):
        spec = I.HermiteSpec(n, 1.0, 0.8)
        v = I.hermite_reduce(spec, lambda u: np.ones_like(u))
        worst = max(worst, abs(v - (1.0 if n == 0 else 0.0)))
    out.append(Check("hermite", "normalization", worst + fault, 1e-8))
    worst = 0.0
    for n in range(7):
        spec = I.HermiteSpec(n, 1.0, 0.8)
        for m in range(7):
            exact = I.normal_ordered_moment(spec, m)
            q = I.normal_ordered_moment_quadrature(spec, m)
            scale = max(1.0, abs(spec.c) ** n * math.factorial(n))
            worst = max(worst, abs(q - exact) / scale)
    out.append(Check("hermite", "normal-ordered moments", worst, 1e-8))
    quad, closed, taylor = I.hermite_generating_terms(1.0, 0.8, 8)
    worst = max(max(_rel(a, c) for a, c in zip(quad, taylor)), max(_rel(a, c) for a, c in zip(closed, taylor)))
    out.append(Check("hermite", "generating function terms", worst, 1e-10))
    return out


def _gamma(fault: float) -> list[Check]:
    out = []
    worst = 0.0
    for om, nu in ((-1.0, 2.0), (-2.0, 1.0), (-0.7, 0.3), (-3.5, 4.2)):
        spec = I.GammaSpec(om, nu)
        worst = max(worst, _rel(I.gamma_normalize(spec), (-om) ** (-nu)))
        worst = max(worst, _rel(I.gamma_reduce(spec, lambda u: 1.0), (-om) ** (-nu)))
    out.append(Check("gamma", "normalization", worst + fault, 1e-9))
    worst = 0.0
    for contour in ("real", "circle"):
        spec = I.GammaSpec(-1.3, 1.7, contour)
        for rho in (0.5, 1.0, 2.0):
            q = I.gamma_reduce(spec, lambda u, rho=rho: u**rho)
            worst = max(worst, _rel(q, I.gamma_moment(spec, rho)))
    out.append(Check("gamma", "moments vs quadrature", worst, 1e-9))
    worst = 0.0
    for contour in ("real", "imaginary", "circle"):
        for om in (-1.0, -2.5):
            base = I.GammaSpec(om, 0.6, contour)
            for eps in (0.5, 2.0, 10.0):
                if contour == "circle":
                    continue
                scaled = I.GammaSpec(eps * om, 0.6, contour)
                worst = max(worst, _rel(I.gamma_normalize(scaled), eps**-0.6 * I.gamma_normalize(base)))
    out.append(Check("gamma", "omega scaling", worst, 1e-12))
    spec = I.GammaSpec(-1.3, 0.4, "imaginary")
    out.append(Check("gamma", "imaginary contour", _rel(I.gamma_reduce(spec, lambda u: 1.0), I.gamma_normalize(spec)), 1e-9))
    v = I.gamma_reduce(I.GammaSpec(-1.0, 1.0), lambda u: math.exp(-u))
    out.append(Check("gamma", "exponential integrand", _rel(v, 0.5), 1e-9))
    v = I.dtau_reduce(lambda t: t * math.exp(-t))
    w = I.dtau_reduce(lambda t: 7.0 * t * math.exp(-7.0 * t))
    out.append(Check("gamma", "d(ln t) scale invariance", max(_rel(v, 1.0), _rel(w, 1.0)), 1e-9))
    return out


CHECKS: dict[str, Callable[[float], list[Check]]] = {
    "gaussian": _gaussian,
    "dirac": _dirac,
    "hermite": _hermite,
    "gamma": _gamma,
}


def run_suite(only=None, fault: float = 0.0) -> list[Check]:
    """Run every family (or those in ``only``). ``fault`` perturbs one check per family."""
    names = FAMILIES if not only else tuple(only)
    for name in names:
        if name not in CHECKS:
            raise ValueError(f"unknown integrator family {name!r}")
    out = []
    for name in names:
        out.extend(CHECKS[name](fault))
    return out
