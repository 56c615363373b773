"""Expression engine: parsing, printing, exact algebra, derivatives, limits."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredholm_lab.expr import (
    Bin,
    Call,
    LimitError,
    Name,
    Neg,
    Num,
    ParseError,
    Pow,
    escape_limit,
    differentiate,
    evaluate_expr,
    finite_substitution,
    iterated_limit,
    nf_from_expr,
    nf_to_expr,
    parse_expr,
    print_expr,
    radial_limit,
)


def nf(text):
    return nf_from_expr(parse_expr(text))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_atoms():
    assert parse_expr("3") == Num(Fraction(3))
    assert parse_expr("0.25") == Num(Fraction(1, 4))
    assert parse_expr("t") == Name("t")
    assert parse_expr("tanh(t)") == Call("tanh", Name("t"))


def test_parse_precedence():
    e = parse_expr("1 + 2*x")
    assert e == Bin("+", Num(Fraction(1)), Bin("*", Num(Fraction(2)), Name("x")))
    e = parse_expr("x^2*sin(y) + 3")
    assert e == Bin("+", Bin("*", Pow(Name("x"), 2), Call("sin", Name("y"))),
                    Num(Fraction(3)))


def test_parse_left_associative():
    e = parse_expr("a - b - c")
    assert e == Bin("-", Bin("-", Name("a"), Name("b")), Name("c"))


def test_parse_leading_minus():
    assert parse_expr("-1") == Neg(Num(Fraction(1)))
    assert parse_expr("-x + 1") == Bin("+", Neg(Name("x")), Num(Fraction(1)))


def test_parse_errors_have_positions():
    with pytest.raises(ParseError) as exc:
        parse_expr("t^t")
    assert "integer" in str(exc.value)
    with pytest.raises(ParseError):
        parse_expr("2 +")
    with pytest.raises(ParseError):
        parse_expr("foo(3)")
    with pytest.raises(ParseError):
        parse_expr("sin(3")
    with pytest.raises(ParseError) as exc:
        parse_expr("q + 1", allowed_vars={"t"})
    assert "unknown identifier" in str(exc.value)


def test_pi_is_builtin():
    e = parse_expr("pi", allowed_vars=set())
    assert abs(evaluate_expr(e, {}) - np.pi) < 1e-15


# ---------------------------------------------------------------------------
# printing round-trip
# ---------------------------------------------------------------------------

_leaf = st.one_of(
    st.integers(min_value=0, max_value=9).map(lambda n: Num(Fraction(n))),
    st.sampled_from(["x", "y", "t"]).map(Name),
    st.just(Num(Fraction(1, 4))),
    st.just(Num(Fraction(3, 10))),
)


def _exprs(depth):
    if depth == 0:
        return _leaf
    sub = _exprs(depth - 1)
    return st.one_of(
        _leaf,
        st.tuples(st.sampled_from("+-*/"), sub, sub).map(lambda t: Bin(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh", "arctan"]), sub)
        .map(lambda t: Call(*t)),
        sub.map(Neg),
        st.tuples(sub, st.integers(min_value=0, max_value=4)).map(lambda t: Pow(*t)),
    )


@settings(max_examples=300, deadline=None)
@given(_exprs(3))
def test_print_parse_round_trip(e):
    assert parse_expr(print_expr(e)) == e


def test_print_examples():
    assert print_expr(parse_expr("2 + tanh(t)")) == "2 + tanh(t)"
    assert print_expr(parse_expr("x^2*sin(y)")) == "x^2*sin(y)"


# ---------------------------------------------------------------------------
# normal-form algebra
# ---------------------------------------------------------------------------

def test_nf_equality_cross_multiplies():
    assert nf("x/(1 + x)") == nf("(2*x)/(2 + 2*x)")
    assert nf("(1 - x)*(1 + x)") == nf("1 - x^2")
    assert nf("x") != nf("x + 1")


def test_nf_cancels_trivial_content():
    assert nf("x/x") == nf("1")
    assert nf("(x*y)/(x*z)") == nf("y/z")


def test_nf_negative_power():
    assert nf("x^-2") == nf("1/x^2")


def test_special_values_fold():
    assert nf("tanh(0)").is_zero()
    assert nf("cos(0)") == nf("1")
    assert nf("exp(0)") == nf("1")
    assert nf("sin(pi)").is_zero()
    assert nf("cos(pi)") == nf("-1")


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def test_derivative_examples():
    d = differentiate(parse_expr("tanh(t)"), "t")
    assert nf_from_expr(d) == nf("1 - tanh(t)^2")
    d = differentiate(parse_expr("x^2*sin(y)"), "x")
    assert nf_from_expr(d) == nf("2*x*sin(y)")
    d = differentiate(parse_expr("arctan(t)"), "t")
    assert nf_from_expr(d) == nf("1/(1 + t^2)")


def test_derivative_constant_in_other_var():
    assert nf_from_expr(differentiate(parse_expr("x^2"), "y")).is_zero()


_SAFE_EXPRS = [
    "2 + tanh(t)",
    "t^2 - 3*t + 1",
    "tanh(t)*sin(t)",
    "exp(-(t^2))",
    "t/(1 + t^2)",
    "arctan(t) + cos(2*t)",
    "(1 - tanh(t))*(1 + tanh(t))",
    "sin(t)^3",
    "exp(tanh(t))",
    "1/(2 + cos(t))",
]


@pytest.mark.parametrize("src", _SAFE_EXPRS)
def test_derivative_matches_central_differences(src):
    e = parse_expr(src)
    de = differentiate(e, "t")
    rng = np.random.default_rng(20240817)
    pts = rng.uniform(-2.0, 2.0, size=100)
    h = 1e-5
    for t0 in pts:
        exact = evaluate_expr(de, {"t": t0})
        approx = (evaluate_expr(e, {"t": t0 + h}) - evaluate_expr(e, {"t": t0 - h})) / (2 * h)
        scale = max(1.0, abs(exact))
        assert abs(exact - approx) / scale < 1e-7


# ---------------------------------------------------------------------------
# limits
# ---------------------------------------------------------------------------

def test_finite_substitution():
    assert finite_substitution(nf("x^2*sin(y) + 3"), "x", Fraction(0)) == nf("3")
    assert finite_substitution(nf("2 + x"), "x", Fraction(1)) == nf("3")


def test_finite_substitution_pole():
    with pytest.raises(LimitError):
        finite_substitution(nf("1/x"), "x", Fraction(0))


def test_escape_limits():
    assert escape_limit(nf("2 + tanh(t)"), "t", +1) == nf("3")
    assert escape_limit(nf("2 + tanh(t)"), "t", -1) == nf("1")
    assert escape_limit(nf("t/(1 + t)"), "t", +1) == nf("1")
    assert escape_limit(nf("(3*t^2 + 1)/(t^2 + t)"), "t", -1) == nf("3")
    assert escape_limit(nf("exp(-(t^2))"), "t", +1).is_zero()
    assert escape_limit(nf("t*exp(-(t^2))"), "t", +1).is_zero()
    assert escape_limit(nf("arctan(t)"), "t", +1) == nf("pi/2")


def test_escape_limit_commutes_with_arithmetic():
    a, b = nf("2 + tanh(t)"), nf("t/(1 + t^2)")
    la = escape_limit(a, "t", +1)
    lb = escape_limit(b, "t", +1)
    assert escape_limit(a * b, "t", +1) == la * lb
    assert escape_limit(a + b, "t", +1) == la + lb
    assert escape_limit(a - b, "t", +1) == la - lb


def test_escape_limit_rejections():
    with pytest.raises(LimitError):
        escape_limit(nf("sin(t)"), "t", +1)
    with pytest.raises(LimitError):
        escape_limit(nf("t"), "t", +1)
    with pytest.raises(LimitError):
        escape_limit(nf("exp(t)"), "t", +1)
    with pytest.raises(LimitError):
        escape_limit(nf("t^2/(1 + t)"), "t", +1)


def test_radial_limit_constant_and_rational():
    assert radial_limit(nf("5"), ("t1", "t2"), "th") == nf("5")
    got = radial_limit(nf("t1^2/(1 + t1^2 + t2^2)"), ("t1", "t2"), "th")
    assert got == nf("cos(th)^2")
    got = radial_limit(nf("(t1*t2)/(1 + t1^2 + t2^2)"), ("t1", "t2"), "th")
    assert got == nf("cos(th)*sin(th)")


def test_radial_limit_rejects_directional_jump():
    with pytest.raises(LimitError):
        radial_limit(nf("tanh(t1)"), ("t1", "t2"), "th")
    with pytest.raises(LimitError):
        radial_limit(nf("t1^2/(1 + t1^2)"), ("t1", "t2"), "th")


def test_iterated_limit_corner():
    steps = [("subst", "x1", Fraction(0)), ("subst", "x2", Fraction(1))]
    assert iterated_limit(nf("x1 + 3*x2"), steps) == nf("3")


def test_nf_to_expr_prints():
    assert print_expr(nf_to_expr(nf("1 - tanh(t)^2"))) == "1 - tanh(t)^2"
