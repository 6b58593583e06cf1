import math

import numpy as np
import pytest

from pathint import model as M
from pathint.critical import energy_residual, exit_time, straight_path, transversality_residual


def _spec(domain, strategy=None):
    cfg = {"domain": domain}
    if strategy is not None:
        cfg["exit_strategy"] = strategy
    return M.make_problem(cfg)


def test_interval_exit_and_candidates():
    p = _spec({"shape": "interval"}, {"variant": "critical_distance", "params": {"speed": 0.5}})
    prof = exit_time(p, [0.3])
    assert prof.tau == pytest.approx(0.6)
    assert prof.exit_point[0] == 0.0
    taus = sorted(c[0] for c in prof.candidates)
    assert taus == pytest.approx([0.6, 1.4])


def test_symmetric_start_lists_both_exits():
    prof = exit_time(_spec({"shape": "interval"}), [0.5])
    pts = sorted(float(c[1][0]) for c in prof.candidates)
    assert pts == [0.0, 1.0]
    assert all(c[0] == pytest.approx(0.5) for c in prof.candidates)


def test_boundary_start_and_errors():
    p = _spec({"shape": "interval"})
    assert exit_time(p, [1.0]).tau == 0.0
    with pytest.raises(ValueError, match="outside"):
        exit_time(p, [1.5])
    with pytest.raises(ValueError, match="no boundary"):
        exit_time(_spec({"shape": "full_space", "params": {"dimension": 1}}), [0.0])
    with pytest.raises(ValueError, match="baseline"):
        exit_time(_spec({"shape": "interval"}, {"variant": "stochastic_baseline"}), [0.5])


def test_fixed_energy_speed():
    p = _spec({"shape": "ball", "params": {"center": [0, 0], "radius": 1}}, {"variant": "fixed_energy", "params": {"energy": 4 * math.pi}})
    prof = exit_time(p, [0.0, 0.5])
    assert prof.tau == pytest.approx(0.25)
    assert np.linalg.norm(prof.path.terminal_velocity) == pytest.approx(2.0)
    assert prof.energy < 1e-10


def test_transversality_from_level_set_function():
    path = straight_path([0.0, 0.0], [0.6, 0.8], 1.0)
    r = transversality_residual(path, S=lambda x: 1.0 - float(np.hypot(*x)))
    assert r < 1e-6
    tilted = transversality_residual(path, grad_S=[1.0, 0.0])
    assert tilted > 1.0


def test_energy_residual_detects_wrong_speed():
    path = straight_path([0.0], [1.0], 2.0)
    assert energy_residual(path, 4 * math.pi) < 1e-12
    assert energy_residual(path, math.pi) == pytest.approx(3 * math.pi)
