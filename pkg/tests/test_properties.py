"""Randomized properties of the parser and the domain geometry."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pathint import model as M
from pathint.expr import BinOp, Call, Neg, Num, Var, Expression, evaluate, parse, to_text

leaf = st.one_of(
    st.floats(min_value=-5, max_value=5, allow_nan=False).map(Num),
    st.integers(0, 1).map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "abs"]), children).map(lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max"]), children, children).map(lambda t: Call(t[0], (t[1], t[2]))),
        children.map(lambda c: Call("exp", (Call("sin", (c,)),))),
    )


def _depth(node):
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, Neg):
        return 1 + _depth(node.operand)
    if isinstance(node, BinOp):
        return 1 + max(_depth(node.left), _depth(node.right))
    return 1 + max(_depth(a) for a in node.args)


trees = st.recursive(leaf, _extend, max_leaves=24).filter(lambda t: _depth(t) <= 6)
PTS = np.random.default_rng(0).uniform(-2, 2, size=(1000, 2))


@settings(max_examples=150, deadline=None)
@given(trees)
def test_print_parse_round_trip(tree):
    e = Expression(tree, 2)
    again = parse(to_text(tree), 2)
    a, b = evaluate(e, PTS), evaluate(again, PTS)
    np.testing.assert_allclose(b, a, rtol=1e-14, atol=1e-14)


SHAPES = [
    M.interval(-1, 2),
    M.box([0, 0], [1, 2]),
    M.ball([0.5, -0.5], 1.5),
    M.annulus([0, 0], 0.5, 2),
    M.half_space([1, 2], 0.5),
]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SHAPES), st.integers(0, 2**31))
def test_distance_is_lipschitz(dom, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-4, 4, size=(400, dom.dimension))
    y = x + rng.normal(scale=rng.choice([0.01, 0.3, 3.0]), size=x.shape)
    gap = np.abs(dom.distance(x) - dom.distance(y))
    assert np.all(gap <= np.linalg.norm(x - y, axis=1) + 1e-12)


def test_distance_lipschitz_bulk():
    rng = np.random.default_rng(1)
    for dom in SHAPES:
        x = rng.uniform(-4, 4, size=(10_000, dom.dimension))
        y = rng.uniform(-4, 4, size=(10_000, dom.dimension))
        gap = np.abs(dom.distance(x) - dom.distance(y))
        assert np.all(gap <= np.linalg.norm(x - y, axis=1) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.1, 3.0), st.floats(0.1, 10.0))
def test_gamma_scaling(omega, nu, eps):
    from pathint.integrators import GammaSpec, gamma_normalize

    a = gamma_normalize(GammaSpec(-eps * omega, nu))
    b = eps**-nu * gamma_normalize(GammaSpec(-omega, nu))
    assert math.isclose(a, b, rel_tol=1e-12)
