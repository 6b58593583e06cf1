"""The fourteen acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) and
then asserts the same verdict. Run standalone with
``python3 tests/test_acceptance.py``.
"""

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pathint import integrators as I
from pathint import model as M
from pathint.critical import energy_residual, exit_time
from pathint.kernels import (
    dirichlet_apply,
    dirichlet_boundary_apply,
    k_infinity_apply,
    neumann_apply,
    neumann_flux,
)
from pathint.paths import sample_endpoints
from pathint.propagator import propagate, propagate_composed
from pathint.solve import (
    eigen_dirichlet,
    exploratory_residual_report,
    mean_exit_time,
    solve_dirichlet,
    write_report,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _rel(a, b):
    return abs(a - b) / abs(b)


def _load(name):
    return json.loads((CONFIGS / name).read_text())


def test_gamma_suite(criterion):
    worst = {"normalize": 0.0, "moment": 0.0, "scaling": 0.0, "quadrature": 0.0}
    for om, nu in ((-1.0, 2.0), (-2.0, 0.5), (-0.7, 1.3)):
        spec = I.GammaSpec(om, nu)
        worst["normalize"] = max(worst["normalize"], _rel(I.gamma_normalize(spec), (-om) ** -nu))
        for rho in (0.5, 1.0, 2.0):
            closed = math.gamma(nu + rho) / math.gamma(nu) * (-om) ** -(nu + rho)
            worst["moment"] = max(worst["moment"], _rel(I.gamma_moment(spec, rho), closed))
            quad = I.gamma_reduce(spec, lambda u, rho=rho: u**rho)
            worst["quadrature"] = max(worst["quadrature"], _rel(quad, closed))
        worst["quadrature"] = max(worst["quadrature"], _rel(I.gamma_reduce(spec, lambda u: 1.0), (-om) ** -nu))
        for eps in (0.5, 2.0, 10.0):
            scaled = I.gamma_normalize(I.GammaSpec(eps * om, nu))
            worst["scaling"] = max(worst["scaling"], _rel(scaled, eps**-nu * I.gamma_normalize(spec)))
    ok = all(v <= 1e-9 for v in worst.values())
    criterion(1, "gamma suite", ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


def test_gaussian_suite(criterion):
    s = 2 * math.pi
    spec = I.GaussianSpec(s, I.brownian_forms([0.25, 0.75]))
    norm = abs(I.gaussian_reduce(spec, lambda u: np.ones(len(u))) - 1)
    mean = abs(I.gaussian_reduce(spec, lambda u: u[:, 0]))
    cov = 0.0
    for s_ in (1.0, s, 5.0):
        sp = I.GaussianSpec(s_, I.brownian_forms([0.25, 0.75]))
        cov = max(cov, abs(I.gaussian_reduce(sp, lambda u: u[:, 0] * u[:, 1]) - s_ / (2 * math.pi) * 0.25))
    u = I.gaussian_samples(spec, 100_000, np.random.default_rng(2024))
    prod = u[:, 0] * u[:, 1]
    z_cov = abs(prod.mean() - 0.25) / (prod.std(ddof=1) / math.sqrt(len(prod)))
    one = I.GaussianSpec(s, [[1.0]])
    z_stein = 0.0
    for F, G in (
        (lambda u: u[:, 0], lambda u: np.ones_like(u)),
        (lambda u: u[:, 0] ** 3, lambda u: 3 * u**2),
        (lambda u: np.sin(u[:, 0]), lambda u: np.cos(u)),
    ):
        r = I.gaussian_stein_residual(one, F, G, 100_000, seed=17)
        z_stein = max(z_stein, float(np.max(np.abs(r.residual) / r.stderr)))
    ok = norm <= 1e-10 and mean <= 1e-10 and cov <= 1e-10 and z_cov <= 4 and z_stein <= 4
    detail = f"norm={norm:.1e} mean={mean:.1e} cov={cov:.1e} sampled={z_cov:.2f}SE stein={z_stein:.2f}SE"
    criterion(2, "gaussian suite", ok, detail)
    assert ok


def test_hermite_suite(criterion):
    s, W = 1.0, 0.8
    norm = max(abs(I.hermite_reduce(I.HermiteSpec(n, s, W), lambda u: np.ones_like(u)) - (n == 0)) for n in range(7))
    mom = 0.0
    for n in range(7):
        spec = I.HermiteSpec(n, s, W)
        for m in range(7):
            exact = abs(math.pi * s * W) ** m * math.factorial(n) * (n == m)
            scale = max(1.0, exact)
            mom = max(mom, abs(I.normal_ordered_moment_quadrature(spec, m) - exact) / scale)
    quad, closed, taylor = I.hermite_generating_terms(s, W, 8)
    gen = max(max(_rel(a, c), _rel(b, c)) for a, b, c in zip(quad, closed, taylor))
    ok = norm <= 1e-8 and mom <= 1e-8 and gen <= 1e-10
    criterion(3, "hermite suite", ok, f"norm={norm:.1e} moments={mom:.1e} generating={gen:.1e}")
    assert ok


def test_dirac_suite(criterion):
    chk = I.dirac_limit_check(lambda x: x * x, lambda x: x * x - 1, [-1.0, 1.0], widths=(1e-2, 1e-3, 1e-4))
    exact = I.dirac_compose(lambda x: x[0] ** 2, lambda x: x**2 - 1, [[-1.0], [1.0]])
    ok = chk.monotone and chk.errors[-1] < 1e-3 and abs(exact - 1.0) < 1e-9
    criterion(4, "dirac suite", ok, "errors=" + ",".join(f"{e:.1e}" for e in chk.errors))
    assert ok


def _free():
    return M.make_problem({"domain": {"shape": "full_space", "params": {"dimension": 1}}})


def _drifted():
    return M.make_problem(
        {"domain": {"shape": "full_space", "params": {"dimension": 1}}, "drift": {"expr": ["0.5 - x1"]}, "potential": -0.3}
    )


def test_semigroup(criterion):
    worst = 0.0
    for label, problem in (("free", _free()), ("drifted", _drifted())):
        for g in ("1", "x1", "x1^2"):
            field = M.scalar_field({"expr": g}, 1)
            a = propagate_composed(problem, field, [0.2], 0.3, 0.5, 100_000, seed=31)
            b = propagate(problem, field, [0.2], 0.8, 100_000, seed=32)
            se = math.hypot(a.stderr, b.stderr)
            gap = abs(a.value - b.value)
            z = 0.0 if gap <= 1e-12 else gap / se
            worst = max(worst, z)
    ok = worst <= 4
    criterion(5, "semigroup", ok, f"worst={worst:.2f} combined SE")
    assert ok


def test_propagator_oracles(criterion):
    t, n = 0.7, 100_000
    end, _ = sample_endpoints(_free(), M.TimeGrid(t, 1), n, seed=41, start=[0.0])
    x = end[:, 0]
    var = float(np.mean(x**2))
    z_var = abs(var - t) / (np.std(x**2, ddof=1) / math.sqrt(n))
    c = 0.4
    damped = _free().replace(potential=-c)
    one = propagate(damped, 1.0, [0.3], t, n, seed=42)
    z_one = abs(one.value - math.exp(-c * t)) / max(one.stderr, 1e-300)
    exact_one = abs(one.value - math.exp(-c * t)) <= 1e-14
    sq = propagate(damped, {"expr": "x1^2"}, [0.3], t, n, seed=43)
    z_sq = abs(sq.value - math.exp(-c * t) * (0.09 + t)) / sq.stderr
    u0 = propagate(damped, {"expr": "sin(x1)"}, [0.3], 0.0, n)
    exact0 = u0.value == math.sin(0.3) and u0.stderr == 0.0
    ok = z_var <= 4 and (exact_one or z_one <= 4) and z_sq <= 4 and exact0
    criterion(6, "propagator oracles", ok, f"variance={z_var:.2f}SE damping={z_sq:.2f}SE U_0 exact={exact0}")
    assert ok


# (int e^{-|x - y|} f(y) dy at x = 0.3, by adaptive quadrature)
K_INF_ORACLE = {
    "exp(-x1^2)": 1.0514129333055346,
    "1/(1+x1^2)": 1.2098810254950547,
    "cos(x1)*exp(-x1^2/4)": 1.0395977773090648,
}


def test_k_infinity_oracle(criterion):
    base = _free().replace(potential=-0.5)
    worst = 0.0
    for text, ref in K_INF_ORACLE.items():
        est = k_infinity_apply(base.replace(source={"expr": text}), [0.3], 100_000, seed=51)
        worst = max(worst, _rel(est.value, ref))
    flat = k_infinity_apply(base.replace(source=1.0), [0.3], 100_000, seed=52, tail_tol=1e-12)
    gap = abs(flat.value - 2.0)
    ok_flat = gap <= 4 * flat.stderr + flat.meta["truncation_bound"] + 1e-12
    ok = worst <= 0.05 and ok_flat
    criterion(7, "K_inf oracle", ok, f"worst relative={worst:.2e} f=1 gap={gap:.1e}")
    assert ok


def test_baseline_dirichlet(criterion):
    problem = M.make_problem(_load("interval_poisson.json"))
    xs = [0.1, 0.3, 0.5, 0.7, 0.9]
    sol = solve_dirichlet(problem, [[x] for x in xs], 100_000, seed=61)
    z = np.abs(sol.values - np.array([x * (1 - x) for x in xs])) / sol.stderr
    edge = solve_dirichlet(problem, [[0.0], [1.0]], 1000, seed=62)
    exact_edges = bool(np.all(edge.values == 0.0))
    T = mean_exit_time(problem, [0.5], 100_000, seed=63)
    z_T = abs(T.value - 0.25) / T.stderr
    ok = bool(np.all(z <= 4)) and exact_edges and z_T <= 4
    criterion(8, "baseline dirichlet", ok, f"worst={z.max():.2f}SE exit time={T.value:.5f} ({z_T:.2f}SE) edges exact={exact_edges}")
    assert ok


def test_boundary_exactness(criterion):
    cfg = {
        "domain": {"shape": "interval", "params": {"a": 0.0, "b": 1.0}},
        "source": {"expr": "1 + x1"},
        "boundary_data": {"expr": "3 + 2*x1"},
        "exit_strategy": {"variant": "critical_distance", "params": {"speed": 1.0}},
    }
    problem = M.make_problem(cfg)
    disk = M.make_problem(
        {
            "domain": {"shape": "ball", "params": {"center": [0, 0], "radius": 1}},
            "source": 1.0,
            "boundary_data": {"expr": "x1^2 - x2^2"},
            "exit_strategy": {"variant": "fixed_energy", "params": {"energy": 3.0}},
        }
    )
    ok = True
    for p, pts in ((problem, [[0.0], [1.0]]), (disk, [[1.0, 0.0], [0.6, 0.8]])):
        for x in pts:
            phi = float(p.boundary_data(np.array(x)))
            ok &= dirichlet_apply(p, x, 1000, seed=71).value == 0.0
            ok &= dirichlet_boundary_apply(p, x, 1000, seed=72).value == phi
        sol = solve_dirichlet(p, pts, 1000, seed=73)
        ok &= bool(np.all(sol.values == p.boundary_data(np.array(pts))))
    criterion(9, "boundary exactness", ok, "exact equality on interval and disk")
    assert ok


def _spec(dom, strategy):
    return M.make_problem(
        {"domain": {"shape": dom.shape, "params": dom.params}, "exit_strategy": M.strategy_to_config(strategy)}
    )


def test_exit_geometry(criterion):
    crit = M.CriticalDistance(2.0)
    fixtures = [
        (M.interval(0, 1), [0.3], 0.15, [0.0]),
        (M.ball([0, 0], 1), [0.6, 0.0], 0.2, [1.0, 0.0]),
        (M.half_space([0, 1], 0), [5.0, 1.5], 0.75, [5.0, 0.0]),
    ]
    exact = 0.0
    for dom, x, tau, sigma in fixtures:
        prof = exit_time(_spec(dom, crit), x)
        exact = max(exact, abs(prof.tau - tau), float(np.max(np.abs(prof.exit_point - sigma))))
    rng = np.random.default_rng(81)
    trans = 0.0
    for dom in (M.interval(0, 1), M.ball([0, 0, 0], 1.5), M.box([0, 0], [1, 2]), M.half_space([1, 1], 0.3)):
        spec = _spec(dom, crit)
        for x in dom.sample(rng, 25, margin=1e-3):
            prof = exit_time(spec, x)
            trans = max(trans, prof.transversality)
    speed = 0.0
    for E in (math.pi / 4, math.pi, 4 * math.pi, 10.0):
        prof = exit_time(_spec(M.ball([0, 0], 1), M.FixedEnergy(E)), [0.1, 0.2])
        v = float(np.linalg.norm(prof.path.terminal_velocity))
        speed = max(speed, abs(v - math.sqrt(E / math.pi)), energy_residual(prof.path, E) / (2 * math.pi))
    ok = exact <= 1e-14 and trans < 1e-10 and speed < 1e-8
    criterion(10, "exit geometry", ok, f"fixtures={exact:.1e} transversality={trans:.1e} speed={speed:.1e}")
    assert ok


def test_fredholm(criterion):
    lam = eigen_dirichlet(q=64, k=2).eigenvalues
    e1, e2 = _rel(lam[0], math.pi**2 / 2), _rel(lam[1], 2 * math.pi**2)
    errs = [_rel(eigen_dirichlet(q=q, k=1).eigenvalues[0], math.pi**2 / 2) for q in (16, 32, 64, 128)]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = e1 <= 0.01 and e2 <= 0.02 and monotone
    criterion(11, "fredholm", ok, f"lambda1 err={e1:.1e} lambda2 err={e2:.1e} doubling={','.join(f'{e:.1e}' for e in errs)}")
    assert ok


def test_split_identities_and_flux(criterion):
    problem = M.make_problem(_load("half_line_damped.json"))
    gap = 0.0
    for x in ([0.4], [1.2]):
        d = dirichlet_apply(problem, x, 20_000, seed=91, decompose=True)
        gap = max(gap, abs(d.value - (d.parts["k_infinity"] - d.parts["f_U"])))
        nm = neumann_apply(problem, x, 20_000, seed=91)
        gap = max(gap, abs(nm.value - (nm.parts["k_infinity"] + nm.parts["f_U"])))
        gap = max(gap, abs(d.parts["k_infinity"] - nm.parts["k_infinity"]), abs(d.parts["f_U"] - nm.parts["f_U"]))
    flat = problem.replace(source=1.0)
    flux, se = neumann_flux(flat, [0.0], 0.05, 20_000, seed=92)
    mirrored, _ = neumann_flux(flat, [0.0], 0.05, 20_000, seed=92, form="reflected")
    ok_flux = abs(flux) <= 4 * se + 1e-12
    ok = gap <= 1e-12 and ok_flux
    detail = f"split gap={gap:.1e} inward flux={flux:.5f} (SE {se:.1e}); reflected form flux={mirrored:.1e}"
    criterion(12, "split identities and flux", ok, detail)
    assert gap <= 1e-12
    assert ok_flux, "Neumann flux does not cancel with the direct F_U term"


def test_exploratory_report(criterion, tmp_path):
    report = exploratory_residual_report(_load("interval_poisson.json"), n=2000, seed=101)
    path = tmp_path / "residual_report.json"
    write_report(report, path)
    rows = json.loads(path.read_text())["rows"]
    modes = [r["mode"] for r in rows]
    ok = path.is_file() and len(rows) == 6 and all(math.isfinite(r["max_abs_residual"]) for r in rows)
    table = " ".join(f"{r['mode']}:{r['median_abs_residual']:.2f}" for r in rows)
    criterion(13, "exploratory residual report (non-gating)", ok, f"median |L Psi + f| {table}")
    assert ok and len(set(modes)) == 6


def _cli(args, out):
    cmd = [sys.executable, "-m", "pathint", *args, "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)


def test_reproducibility(criterion, tmp_path):
    poisson = str(CONFIGS / "interval_poisson.json")
    damped = str(CONFIGS / "half_line_damped.json")
    commands = [
        (["solve", "--config", poisson, "--points", "0.25,0.5", "--samples", "4000", "--seed", "7"], ["solution.csv", "solution.json"]),
        (["kernel", "--config", damped, "--kind", "neumann", "--points", "0.5", "--samples", "3000", "--seed", "9"], ["kernel.csv"]),
    ]
    same = True
    for k, (args, files) in enumerate(commands):
        outs = []
        for workers in (1, 4):
            out = tmp_path / f"c{k}w{workers}"
            _cli([*args, "--workers", str(workers)], out)
            outs.append(out)
        for name in files:
            same &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    criterion(14, "reproducibility", same, "solve and kernel outputs identical for 1 and 4 workers")
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
