import math

import numpy as np
import pytest

from pathint import model as M


def test_brownian_setup_generator():
    p = M.make_problem(
        {
            "domain": {"shape": "interval", "params": {"a": 0, "b": 1}},
            "frame": [{"builtin": "basis", "params": {"index": 1, "scale": math.sqrt(2 * math.pi)}}],
            "diffusion_scale": 1.0,
        }
    )
    a = p.diffusion_matrix(np.array([[0.4]]))
    assert a[0, 0, 0] == pytest.approx(0.5, abs=1e-15)


def test_default_frame_is_half_laplacian():
    p = M.make_problem({"domain": {"shape": "ball", "params": {"center": [0, 0], "radius": 1}}})
    np.testing.assert_allclose(p.diffusion_matrix(np.zeros((1, 2)))[0], 0.5 * np.eye(2), atol=1e-15)


def test_degenerate_frame():
    cfg = {
        "domain": {"shape": "box", "params": {"lo": [0, 0], "hi": [1, 1]}},
        "frame": [{"expr": ["1", "0"]}, {"expr": ["2", "0"]}],
    }
    with pytest.raises(M.ConfigError, match="degenerate frame"):
        M.make_problem(cfg)


@pytest.mark.parametrize(
    "cfg,msg",
    [
        ({"domain": {"shape": "torus"}}, "unknown shape"),
        ({"domain": {"shape": "interval"}, "diffusion_scale": -1}, "diffusion_scale"),
        ({"domain": {"shape": "interval"}, "exit_strategy": {"variant": "fixed_energy", "params": {"energy": 0}}}, "energy"),
        ({"domain": {"shape": "interval"}, "source": {"expr": "x2"}}, "unknown identifier"),
        ({"domain": {"shape": "interval"}, "drift": [1.0, 2.0]}, "length"),
    ],
)
def test_config_errors(cfg, msg):
    with pytest.raises(M.ConfigError, match=msg):
        M.make_problem(cfg)


def test_signed_distance_examples():
    assert M.signed_distance(M.interval(0, 1), [0.3]) == pytest.approx(-0.3)
    assert M.signed_distance(M.ball([0, 0], 1), [0.0, 0.0]) == -1.0
    assert M.signed_distance(M.half_space([1, 0], 0), [2.0, 5.0]) == -2.0
    assert M.signed_distance(M.box([0, 0], [2, 1]), [3.0, 2.0]) == pytest.approx(math.sqrt(2))
    assert M.signed_distance(M.annulus([0, 0], 1, 2), [1.5, 0.0]) == pytest.approx(-0.5)


def test_full_space_has_no_boundary():
    d = M.full_space(2)
    assert not d.has_boundary
    assert all(M.Domain(s, 1, p).has_boundary for s, p in [("interval", {"a": 0, "b": 1})])


SHAPES = [
    M.interval(-1, 2),
    M.box([0, 0, 0], [1, 2, 3]),
    M.ball([0.5, -0.5], 1.5),
    M.annulus([0, 0], 0.5, 2),
    M.half_space([1, 2], 0.5),
]


@pytest.mark.parametrize("dom", SHAPES, ids=lambda d: d.shape)
def test_normals_unit_on_boundary(dom):
    rng = np.random.default_rng(3)
    for x in dom.sample(rng, 50, margin=0.05):
        for b in dom.project(x):
            assert abs(dom.distance(b)) < 1e-12
            assert abs(np.linalg.norm(dom.inward_normal(b)) - 1) < 1e-12


@pytest.mark.parametrize("dom", [M.interval(0, 1), M.ball([0, 0], 1), M.half_space([0, 1], -1)], ids=lambda d: d.shape)
def test_gradient_projection(dom):
    rng = np.random.default_rng(5)
    pts = dom.sample(rng, 200, margin=1e-3)
    d = dom.distance(pts)
    grad = -dom.inward_normal(pts)
    proj = pts - d[:, None] * grad
    assert np.max(np.abs(dom.distance(proj))) < 1e-10


def test_scalar_field_gradient_check():
    f = M.scalar_field({"builtin": "gaussian_bump", "params": {"center": [0.2, 0.1], "width": 0.7}}, 2)
    pts = np.random.default_rng(0).normal(size=(20, 2))
    assert f.check_gradient(pts) < 1e-6


def test_problem_replace_and_fingerprint():
    p = M.make_problem({"domain": {"shape": "interval"}, "source": 1.0})
    q = p.replace(source=2.0)
    assert q.source(np.array([0.5])) == 2.0
    assert p.fingerprint() != q.fingerprint()
    assert p.fingerprint() == M.make_problem({"domain": {"shape": "interval"}, "source": 1.0}).fingerprint()


def test_time_grid():
    g = M.TimeGrid(1.0, 4)
    np.testing.assert_allclose(g.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    assert M.TimeGrid.with_step(0.3, 0.1).steps == 3
    with pytest.raises(ValueError):
        M.TimeGrid(1.0, 0)


def test_fixed_energy_speed():
    assert M.FixedEnergy(math.pi).speed == pytest.approx(1.0)
    with pytest.raises(M.ConfigError):
        M.CriticalDistance(0.0)
