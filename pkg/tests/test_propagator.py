import math

import numpy as np
import pytest
from scipy.integrate import quad

from pathint import model as M
from pathint.propagator import analytic_propagator, generator_residual, propagate


def _line(**kw):
    return M.make_problem({"domain": {"shape": "full_space", "params": {"dimension": 1}}, **kw})


def test_free_heat_against_density():
    t, x = 0.6, 0.4
    ref = quad(lambda y: analytic_propagator("free", t, x, y) * math.cos(y), -np.inf, np.inf)[0]
    assert ref == pytest.approx(math.cos(x) * math.exp(-t / 2), rel=1e-10)
    est = propagate(_line(), {"expr": "cos(x1)"}, [x], t, 100_000, seed=1)
    assert abs(est.value - ref) < 4 * est.stderr


def test_oscillator_mehler():
    t, x, w = 0.5, 0.4, 1.0
    ref = quad(lambda y: analytic_propagator("oscillator", t, x, y, omega=w) * math.exp(-y * y), -np.inf, np.inf)[0]
    p = _line(potential={"expr": "-x1^2/2"})
    est = propagate(p, {"expr": "exp(-x1^2)"}, [x], t, 100_000, seed=2, dt=2.5e-3)
    # left-rule potential integral adds an O(dt) bias on top of the noise
    assert abs(est.value - ref) < 4 * est.stderr + 5e-3 * ref


def test_half_line_density_is_nonnegative_and_vanishes_at_wall():
    assert analytic_propagator("half_line", 0.3, 0.5, 0.0) == 0.0
    assert analytic_propagator("half_line", 0.3, 0.5, 0.7) > 0


def test_constant_potential_is_exact():
    est = propagate(_line(potential=-0.7), 1.0, [0.0], 1.3, 1000, seed=3)
    assert est.value == pytest.approx(math.exp(-0.91), rel=1e-14)


def test_zero_horizon_and_validation():
    p = _line()
    est = propagate(p, {"expr": "x1^3"}, [2.0], 0.0, 10)
    assert (est.value, est.stderr) == (8.0, 0.0)
    with pytest.raises(ValueError):
        propagate(p, 1.0, [0.0], -1.0, 10)
    with pytest.raises(ValueError):
        propagate(p, 1.0, [math.nan], 1.0, 10)
    with pytest.raises(ValueError):
        propagate(p, 1.0, [0.0], 1.0, 0)


def test_generator_residual():
    p = _line(drift={"expr": ["-0.5*x1"]}, potential={"expr": "-0.1*x1^2"})
    res, se = generator_residual(p, {"expr": "cos(x1)"}, [0.3], 0.5, 40_000, seed=4, h=0.05, steps=200)
    assert abs(res) < 4 * se + 0.02


def test_antithetic_reduces_variance():
    p = _line()
    plain = propagate(p, {"expr": "x1"}, [0.0], 1.0, 20_000, seed=5)
    anti = propagate(p, {"expr": "x1"}, [0.0], 1.0, 20_000, seed=5, antithetic=True)
    assert abs(anti.value) < 1e-12 and plain.stderr > 0
