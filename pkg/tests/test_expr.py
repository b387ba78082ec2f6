import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import ALPHA, X1, X2, expressions, smooth_expressions
from symverify.expr import (
    DomainError,
    ParseError,
    UnboundSymbolError,
    canonical,
    differentiate,
    evaluate,
    is_zero,
    jet,
    normalize,
    opaque,
    parse,
    substitute,
    substitute_function,
    to_text,
)


def test_parse_and_print_sum():
    e = parse("x1^2 + sin(u)")
    assert e == X1**2 + sp.sin(sp.Symbol("u"))
    assert to_text(e) == "x1^2 + sin(u)"


def test_operator_coefficient():
    assert parse("(r+1)*x1") == (sp.Symbol("r") + 1) * X1


def test_syntax_error_offset():
    with pytest.raises(ParseError) as err:
        parse("x1 + ")
    assert err.value.offset == 5
    assert "number" in err.value.expected


@pytest.mark.parametrize(
    "text, fns",
    [("foo(x)", None), ("F(x, y)", {"F": 1}), ("diff(u)", None), ("x1 ** 2", None), ("(x1", None), ("3x", None)],
)
def test_parse_errors(text, fns):
    with pytest.raises(ParseError):
        parse(text, fns)


def test_decimals_are_exact():
    assert parse("0.1 + 0.2") == sp.Rational(3, 10)
    assert parse("1.5*x") == sp.Rational(3, 2) * sp.Symbol("x")


def test_jet_identity_ignores_index_order():
    assert parse("diff(u,x2,x1)") == jet("u", "x1", "x2")
    assert to_text(jet("u", "x2", "x1")) == "diff(u,x1,x2)"


def test_opaque_printing():
    z = sp.Symbol("z")
    assert to_text(opaque("F", 1)(z)) == "F'(z)"
    assert to_text(opaque("F", 2)(z)) == "F''(z)"
    assert parse("F''(z)", {"F": 1}) == opaque("F", 2)(z)


def test_differentiate_power_matches_fd():
    e = parse("(a*w + C1)^(2/(r+1))")
    d = differentiate(e, "w")
    assert is_zero(d - parse("2*a/(r+1)*(a*w + C1)^((1-r)/(r+1))"))
    env = {"a": math.sqrt(3), "C1": 0.0, "r": 2.0}
    h = 1e-5
    fd = (evaluate(e, {**env, "w": 1 + h}) - evaluate(e, {**env, "w": 1 - h})) / (2 * h)
    assert abs(fd - evaluate(d, {**env, "w": 1.0})) < 1e-8


def test_differentiate_constant_and_chain_rule():
    assert differentiate(parse("C1"), "x1") == 0
    e = parse("F(diff(u,x1) + alpha^2*u)", {"F": 1})
    expected = parse("alpha^2*F'(diff(u,x1) + alpha^2*u)", {"F": 1})
    assert differentiate(e, "u") == expected


def test_substitute_examples():
    e = parse("diff(u,x1,x1) + alpha^2*diff(u,x1)")
    assert substitute(e, {"diff(u,x1,x1)": parse("-alpha^2*diff(u,x1)")}) == 0
    assert substitute(e, {}) == e
    fns = {"phi1": 1}
    got = substitute(parse("v1^r"), {"v1": parse("x1^(-1/(r+1))*phi1(omega)", fns)})
    assert got == parse("x1^(-r/(r+1))*phi1(omega)^r", fns)


def test_substitute_function_derivatives():
    e = parse("F'(z)*F(z)", {"F": 1})
    got = substitute_function(e, "F", ["s"], parse("s^3"))
    assert got == 3 * sp.Symbol("z") ** 5


def test_evaluate_examples():
    assert evaluate(parse("x1^2 + 1"), {"x1": 2}) == 5
    assert abs(evaluate(parse("sqrt(r*(r+1)/(2*(r-1)))"), {"r": 2}) - 1.7320508075688772) < 1e-15


@pytest.mark.parametrize(
    "text, env",
    [("1/(1 - v1^r)", {"v1": 1, "r": 2}), ("ln(x)", {"x": -1.0}), ("x^(1/3)", {"x": -8.0}), ("sqrt(x)", {"x": -1.0})],
)
def test_domain_errors(text, env):
    with pytest.raises(DomainError):
        evaluate(parse(text), env)


def test_unbound_symbol():
    with pytest.raises(UnboundSymbolError):
        evaluate(parse("x + y"), {"x": 1})


def test_evaluate_with_opaque_sampler():
    calls = []

    def F(order, z):
        calls.append(order)
        return np.cos(z) if order == 1 else np.sin(z)

    v = evaluate(parse("F'(x) + F(x)", {"F": 1}), {"x": 0.3}, {"F": F})
    assert abs(v - (math.cos(0.3) + math.sin(0.3))) < 1e-15
    assert sorted(calls) == [0, 1]


def test_canonical_identities():
    x = sp.Symbol("x")
    assert canonical(x + 0) == x
    assert canonical(x * 1) == x
    assert canonical(x * 0) == 0
    assert canonical(x**1) == x
    assert canonical(x**0) == 1
    assert canonical(sp.log(sp.exp(x))) == x
    assert canonical(sp.exp(sp.log(x))) == x


@settings(max_examples=1000)
@given(expressions)
def test_round_trip(e):
    assert parse(to_text(e), {"F": 1, "G": 2}) == e


@settings(max_examples=60)
@given(smooth_expressions, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_derivative_order(e, a, b):
    d = differentiate(e, "x1")
    exact = float(evaluate(d, {"x1": a, "x2": b}))
    errs = []
    for h in (1e-3, 1e-4):
        fd = (evaluate(e, {"x1": a + h, "x2": b}) - evaluate(e, {"x1": a - h, "x2": b})) / (2 * h)
        errs.append(abs(fd - exact))
    scale = 1 + abs(exact)
    if errs[0] < 1e-9 * scale:
        return  # derivative locally trivial or the truncation error is rounding-dominated
    assert math.log10(errs[0] / errs[1]) >= 1.9


@settings(max_examples=100)
@given(expressions, expressions, st.integers(-4, 4), st.fractions(-2, 2, max_denominator=5))
def test_linearity(e1, e2, a, b):
    b = sp.Rational(b.numerator, b.denominator)
    lhs = differentiate(a * e1 + b * e2, "x1")
    rhs = a * differentiate(e1, "x1") + b * differentiate(e2, "x1")
    assert is_zero(lhs - rhs)


@settings(max_examples=100)
@given(smooth_expressions)
def test_simplification_soundness(e):
    raw = sp.expand(e) * (X2**2 + 1) / (X2**2 + 1)
    simple = normalize(raw)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(100, 2))
    a = np.array([evaluate(e, {"x1": p, "x2": q}) for p, q in pts], dtype=float)
    s = np.array([evaluate(simple, {"x1": p, "x2": q}) for p, q in pts], dtype=float)
    assert np.all(np.abs(a - s) <= 1e-12 * np.maximum(1.0, np.abs(a)) * 10)
