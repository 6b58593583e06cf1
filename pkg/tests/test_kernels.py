import math

import numpy as np
import pytest

from pathint import model as M
from pathint.kernels import (
    NonDissipativeError,
    dirichlet_apply,
    dirichlet_boundary_apply,
    f_U_apply,
    k_infinity_apply,
    kernel_density,
    neumann_apply,
    neumann_boundary_apply,
)


def _half_line(**kw):
    cfg = {"domain": {"shape": "half_space", "params": {"normal": [1.0], "offset": 0.0}}, "potential": -0.5, "source": 1.0}
    cfg.update(kw)
    return M.make_problem(cfg)


def test_dirichlet_critical_constant_case():
    # U_t 1 = e^{-ct}, so the interior integral is (1 - e^{-c tau}) / c
    p = _half_line()
    est = dirichlet_apply(p, [0.8], 1000, seed=1)
    assert est.value == pytest.approx((1 - math.exp(-0.4)) / 0.5, rel=1e-12)


def test_parts_are_consistent_between_functionals():
    p = _half_line(source={"expr": "exp(-x1^2)"})
    k = k_infinity_apply(p, [0.7], 5000, seed=2)
    f = f_U_apply(p, [0.7], 5000, seed=2)
    d = dirichlet_apply(p, [0.7], 5000, seed=2, decompose=True)
    assert k.value == f.parts["k_infinity"]
    assert f.value == k.parts["f_U"]
    assert abs(d.value - (k.value - f.value)) < 1e-12


def test_non_dissipative_potential():
    p = _half_line(potential=0.1)
    with pytest.raises(NonDissipativeError):
        k_infinity_apply(p, [0.5], 100)
    # an explicit damping shift is accepted
    assert k_infinity_apply(_half_line(potential=-0.5), [0.5], 100, damping=0.5).value > 0


def test_boundary_apply_on_and_off_boundary():
    p = _half_line(boundary_data={"expr": "2 + x1"})
    assert dirichlet_boundary_apply(p, [0.0], 10).value == 2.0
    est = dirichlet_boundary_apply(p, [1.0], 50_000, seed=3)
    # U_tau (2 + x) with tau = 1 and c = 1/2
    assert abs(est.value - 3 * math.exp(-0.5)) < 4 * est.stderr


def test_neumann_forms():
    p = _half_line()
    direct = neumann_apply(p, [0.5], 1000, seed=4, tail_tol=1e-12)
    assert direct.value == pytest.approx((1 + math.exp(-0.25)) / 0.5, rel=1e-9)
    mirrored = neumann_apply(p, [0.5], 1000, seed=4, form="reflected", tail_tol=1e-12)
    assert mirrored.value == pytest.approx(4.0, rel=1e-9)
    with pytest.raises(ValueError):
        neumann_apply(p, [0.5], 10, form="sideways")


def test_neumann_boundary_kernel():
    p = _half_line()
    est = neumann_boundary_apply(p, [0.5], 1.0, 50_000, seed=5)
    # P(x_tau > 0) e^{-c tau} with tau = 0.5
    from scipy.stats import norm

    ref = norm.cdf(0.5 / math.sqrt(0.5)) * math.exp(-0.25)
    assert abs(est.value - ref) < 4 * est.stderr
    box = M.make_problem({"domain": {"shape": "box", "params": {"lo": [0, 0], "hi": [1, 1]}}})
    with pytest.raises(ValueError, match="unsupported domain"):
        neumann_boundary_apply(box, [0.5, 0.5], 1.0, 10)


def test_kernel_density_baseline_interval():
    p = M.make_problem({"domain": {"shape": "interval"}, "exit_strategy": {"variant": "stochastic_baseline"}})
    g = kernel_density(p, [0.5], [np.linspace(0, 1, 11)], 20_000, seed=6)
    assert abs(g.integrate(lambda y: np.ones(len(y))) - 0.25) < 0.01
    # G(1/2, y) = min(y, 1 - y) on the unit interval
    ref = np.minimum(g.centers[0], 1 - g.centers[0])
    assert np.all(np.abs(g.density - ref) < 4 * g.stderr + 0.02)
