import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings

from strategies import expressions
from symverify.expr import evaluate, is_zero, jet, parse
from symverify.jet import (
    Equation,
    EquationSystem,
    ImplicitSystemError,
    JetSpace,
    ShellReductionError,
    implicit_derivative,
    reduce_on_shell,
    total_derivative,
)

U = JetSpace(("x1", "x2"), ("u",))
ODE = EquationSystem((Equation.from_text("diff(u,x1,x1) + alpha^2*diff(u,x1) = 0", lead="diff(u,x1,x1)"),), U)


def test_total_derivative_examples():
    assert total_derivative(parse("x1*diff(u,x2)"), "x1", U) == parse("diff(u,x2) + x1*diff(u,x1,x2)")
    assert total_derivative(parse("diff(u,x1) + alpha^2*u"), "x1", U) == parse("diff(u,x1,x1) + alpha^2*diff(u,x1)")
    fns = {"F": 1}
    got = total_derivative(parse("F(diff(u,x1) + alpha^2*u)", fns), "x2", U)
    assert is_zero(got - parse("F'(diff(u,x1) + alpha^2*u)*(diff(u,x1,x2) + alpha^2*diff(u,x2))", fns))


def test_reduce_on_shell_examples():
    assert reduce_on_shell(parse("diff(u,x1,x1)"), ODE) == parse("-alpha^2*diff(u,x1)")
    assert reduce_on_shell(parse("diff(u,x1,x1,x2)"), ODE) == parse("-alpha^2*diff(u,x1,x2)")
    assert reduce_on_shell(parse("sin(u)"), ODE) == parse("sin(u)")


def test_reduce_on_shell_order_guard():
    with pytest.raises(ShellReductionError):
        reduce_on_shell(parse("diff(u,x1,x1,x2,x2,x2)"), ODE, max_order=2)


def test_solved_form_invariants():
    eq = Equation.from_text("diff(u,x2,x2) = 1/(1 - diff(u,x1)^r)", lead="diff(u,x2,x2)")
    assert eq.check_solved_form()
    with pytest.raises(ValueError):
        Equation(parse("diff(u,x1) - u"), jet("u", "x1"), parse("diff(u,x1)"))
    with pytest.raises(ValueError):
        Equation.from_text("u = x1", lead="diff(u,x1)")


def test_solved_form_through_log():
    eq = Equation.from_text("ln(diff(u,t)) = 1/diff(u,x,x)", lead="diff(u,t)")
    assert eq.replacement == parse("exp(1/diff(u,x,x))")


def test_duplicate_leads_rejected():
    e = Equation.from_text("diff(u,x1) = 0", lead="diff(u,x1)")
    with pytest.raises(ValueError):
        EquationSystem((e, e), U)


def test_implicit_derivative_ansatz_v2():
    V = JetSpace(("x1", "x2"), ("v1", "v2"), ("omega",))
    fns = {"phi1": 1, "phi2": 1}
    rel = [
        Equation.from_text("v1 = x1^(-1/(r+1))*phi1(omega)", fns, lead="v1"),
        Equation.from_text("v2 = x1^(r/(r+1))*phi2(omega)", fns, lead="v2"),
        Equation.from_text("omega = x2 - v2", fns, lead="omega"),
    ]
    got = implicit_derivative(rel, "diff(v2,x2)", "x2", V)
    want = parse("x1^(r/(r+1))*phi2'(omega)/(1 + x1^(r/(r+1))*phi2'(omega))", fns)
    assert is_zero(got - want)


def test_implicit_derivative_tangent_ansatz():
    S = JetSpace(("t", "x"), ("u",), ("omega",))
    fns = {"f": 1, "phi": 1}
    rel = [
        Equation.from_text("diff(u,x) = f(omega)", fns, lead="diff(u,x)"),
        Equation.from_text("diff(u,t) = exp(phi(omega) + x/f(omega))", fns, lead="diff(u,t)"),
        Equation.from_text("omega = x*diff(u,x) - 2*u", fns, lead="omega"),
    ]
    got = implicit_derivative(rel, "diff(u,x,x)", "x", S)
    assert is_zero(got - parse("-f'(omega)*f(omega)/(1 - x*f'(omega))", fns))


def test_implicit_derivative_explicit_relation():
    fns = {"g": 1}
    rel = [Equation.from_text("diff(u,x1) = g(x1)", fns, lead="diff(u,x1)")]
    got = implicit_derivative(rel, "diff(u,x1,x1)", "x1", U, unknowns=["diff(u,x1,x1)"])
    assert got == parse("g'(x1)", fns)


def test_singular_implicit_system():
    rel = [Equation(parse("v - w"), name="a"), Equation(parse("2*v - 2*w"), name="b")]
    S = JetSpace(("x",), ("v", "w"))
    with pytest.raises(ImplicitSystemError) as err:
        implicit_derivative(rel, "diff(v,x)", "x", S)
    assert err.value.determinant is not None


def test_implicit_matches_explicit_solution():
    # v2 = x1*(x2 - v2)  <=>  v2 = x1*x2/(1 + x1)
    S = JetSpace(("x1", "x2"), ("v2",))
    rel = [Equation(parse("v2 - x1*(x2 - v2)"))]
    got = implicit_derivative(rel, "diff(v2,x2)", "x2", S)
    explicit = sp.diff(parse("x1*x2/(1 + x1)"), sp.Symbol("x2"))
    rng = np.random.default_rng(1)
    for a, b in rng.uniform(0.1, 2, size=(100, 2)):
        env = {"x1": a, "x2": b, "v2": a * b / (1 + a)}
        assert abs(evaluate(got, env) - evaluate(explicit, env)) < 1e-10


@settings(max_examples=500)
@given(expressions)
def test_total_derivatives_commute(e):
    a = total_derivative(total_derivative(e, "x1", U), "x2", U)
    b = total_derivative(total_derivative(e, "x2", U), "x1", U)
    assert is_zero(a - b)


@settings(max_examples=150)
@given(expressions, expressions)
def test_leibniz(e1, e2):
    lhs = total_derivative(e1 * e2, "x1", U)
    rhs = total_derivative(e1, "x1", U) * e2 + e1 * total_derivative(e2, "x1", U)
    assert is_zero(lhs - rhs)


@settings(max_examples=150)
@given(expressions)
def test_on_shell_idempotent(e):
    once = reduce_on_shell(e, ODE)
    assert reduce_on_shell(once, ODE) == once
