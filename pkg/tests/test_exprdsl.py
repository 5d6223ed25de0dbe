import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from goldenconn import exprdsl as ex
from goldenconn.errors import ArityError, DomainError, ExprSyntaxError, UnknownIdentifier
from goldenconn.fields import SplitMix64, evaluate_jet

from oracles import symbols, to_sympy

COORDS = ("x", "y", "z")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, value",
    [
        ("1 + 2 * 3", 7.0),
        ("2 ^ 3 ^ 2", 64.0),  # left associative
        ("-2 ^ 2", -4.0),  # ^ binds tighter than unary minus
        ("(-2) ^ 2", 4.0),
        ("8 / 4 / 2", 1.0),
        ("1 - 2 - 3", -4.0),
        ("2 ^ -1", 0.5),
        ("phi - phibar", math.sqrt(5)),
        ("phi * phibar", -1.0),
        ("sqrt5 ^ 2", 5.0),
        ("abs(-3) + sqrt(4)", 5.0),
        ("1.5e1", 15.0),
    ],
)
def test_precedence_and_constants(text, value):
    assert ex.evaluate(ex.parse(text, COORDS), {}) == pytest.approx(value, rel=1e-15)


def test_variables_are_collected():
    e = ex.parse("x * sin(y) + 2", COORDS)
    assert ex.variables(e) == {"x", "y"}


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        ex.parse("x + w", COORDS)
    assert info.value.name == "w"


def test_arity():
    with pytest.raises(ArityError):
        ex.parse("sin(x, y)", COORDS)


@pytest.mark.parametrize("text", ["", "1 +", "(x", "x y", "2 ^ x", "sin x", "*3"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        ex.parse(text, COORDS)


def test_syntax_error_reports_offset_and_expected():
    with pytest.raises(ExprSyntaxError) as info:
        ex.parse("1 + * 2", COORDS)
    assert info.value.position == 4
    assert "number" in info.value.expected


# ---------------------------------------------------------------------------
# Round trip
# ---------------------------------------------------------------------------

leaves = st.one_of(
    st.sampled_from([ex.Var(c) for c in COORDS]),
    st.sampled_from([ex.Const(c) for c in ("pi", "sqrt5", "phi", "phibar")]),
    st.floats(min_value=0, max_value=1e6, allow_nan=False).map(ex.Num),
    st.integers(0, 20).map(lambda k: ex.Num(float(k))),
)


def _extend(children):
    return st.one_of(
        children.map(ex.Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: ex.BinOp(*t)),
        st.tuples(children, st.integers(-3, 4).map(lambda k: ex.num(float(k)))).map(lambda t: ex.Pow(*t)),
        st.tuples(st.sampled_from(sorted(ex.FUNCTIONS)), children).map(lambda t: ex.Call(*t)),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@given(exprs)
@settings(max_examples=200, deadline=None)
def test_print_parse_round_trip(e):
    text = ex.to_text(e)
    again = ex.parse(text, COORDS)
    assert again == e
    assert ex.to_text(again) == text


# ---------------------------------------------------------------------------
# Differentiation against sympy and finite differences
# ---------------------------------------------------------------------------

SMOOTH = [
    "x^2 * y - 3 * z",
    "sin(x) * cos(y) + tan(z / 3)",
    "exp(x * y) / (2 + z^2)",
    "log(2 + x) * sqrt(3 + y)",
    "(1 + x^2)^-2 * phi - sqrt5 * y^3",
    "abs(x - 3) * y ^ 0.5 + pi",
    "(x + y + z)^3 / (4 + x*y)",
]


@pytest.mark.parametrize("text", SMOOTH)
def test_first_and_second_partials_match_sympy(text):
    point = np.array([[0.3, 0.7, -0.4]])
    parts = evaluate_jet([ex.parse(text, COORDS)], COORDS, point, 2)
    s = to_sympy(text, COORDS)
    xs = symbols(COORDS)
    subs = dict(zip(xs, point[0]))
    assert parts[0][0, 0] == pytest.approx(float(s.subs(subs)), rel=1e-12)
    for i in range(3):
        want = float(sp.diff(s, xs[i]).subs(subs))
        assert parts[1][0, 0, i] == pytest.approx(want, rel=1e-12, abs=1e-14)
        for j in range(3):
            want2 = float(sp.diff(s, xs[i], xs[j]).subs(subs))
            assert parts[2][0, 0, i, j] == pytest.approx(want2, rel=1e-11, abs=1e-13)


@given(exprs, st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_dual_partials_match_sympy_on_random_trees(e, seed):
    rng = SplitMix64(seed)
    point = np.array([[0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform()]])
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            parts = evaluate_jet([e], COORDS, point, 1)
    except (DomainError, ZeroDivisionError, OverflowError, FloatingPointError):
        assume(False)
    values = np.concatenate([parts[0].ravel(), parts[1].ravel()])
    assume(np.all(np.isfinite(values)) and np.abs(values).max() < 1e8)
    s = to_sympy(ex.to_text(e), COORDS)
    xs = symbols(COORDS)
    subs = dict(zip(xs, point[0]))
    for i in range(3):
        want = complex(sp.N(sp.diff(s, xs[i]).subs(subs), 30))
        assume(abs(want.imag) < 1e-12)
        scale = max(1.0, abs(want.real))
        assert abs(parts[1][0, 0, i] - want.real) <= 1e-10 * scale


def test_vectorised_over_points():
    pts = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    parts = evaluate_jet([ex.parse("x * y * z", COORDS)], COORDS, pts, 1)
    np.testing.assert_allclose(parts[0][:, 0], pts.prod(axis=1))
    np.testing.assert_allclose(parts[1][:, 0, 0], pts[:, 1] * pts[:, 2])


def test_shared_subtrees_are_evaluated_once():
    base = ex.parse("sin(x) + y", COORDS)
    calls = []
    env = {"x": 0.5, "y": 1.0, "z": 0.0}
    memo = {}
    a = ex.evaluate(ex.mul(base, base), env, memo)
    calls.append(len(memo))
    assert a == pytest.approx((math.sin(0.5) + 1.0) ** 2)
    # one entry per distinct node: Var x, Call, Var y, BinOp, product
    assert calls[0] == 5


# ---------------------------------------------------------------------------
# Domain errors
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, values",
    [
        ("1 / x", {"x": 0.0}),
        ("log(x)", {"x": -1.0}),
        ("sqrt(x)", {"x": -2.0}),
        ("x ^ 0.5", {"x": -1.0}),
        ("x ^ -1", {"x": 0.0}),
    ],
)
def test_domain_errors(text, values):
    with pytest.raises(DomainError):
        ex.evaluate_text(text, values)


def test_domain_error_names_subexpression():
    with pytest.raises(DomainError) as info:
        ex.evaluate_text("1 + log(x - 1)", {"x": 0.5})
    assert "log" in str(info.value)
