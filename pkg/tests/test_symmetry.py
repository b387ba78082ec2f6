import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from symverify.expr import evaluate, is_zero, jet, parse
from symverify.jet import Equation, EquationSystem, JetSpace
from symverify.numerics import integrate_ode
from symverify.sampling import SamplingConfig
from symverify.symmetry import (
    VectorField,
    check_conditional_symmetry,
    check_invariant,
    check_lie_backlund,
    check_symmetry,
    invariance_condition_of_solution,
    is_contact,
    lie_bracket,
    prolong,
    verdict_for,
)

U = JetSpace(("x1", "x2"), ("u",))
V = JetSpace(("x1", "x2"), ("v1", "v2"))
Q_COEFFS = {"x1": "(r+1)*x1", "x2": "r*v2", "v1": "-v1", "v2": "r*v2"}
R_SAMPLES = SamplingConfig(parameters={"r": [2, 3, -2]}, boxes={"x1": (0.2, 2), "v1": (0.2, 2)})


def system3():
    eqs = (
        Equation.from_text("diff(v1,x2) = diff(v2,x1)", lead="diff(v1,x2)"),
        Equation.from_text("diff(v2,x2) = 1/(1 - v1^r)", lead="diff(v2,x2)"),
    )
    return EquationSystem(eqs, V)


def test_prolong_translation_in_u():
    pr = prolong(VectorField.from_text({"u": "1"}), 2, U)
    for v in pr.variables:
        expected = 1 if v == sp.Symbol("u") else 0
        assert pr.coefficient(v) == expected


def test_prolong_order_limit():
    with pytest.raises(ValueError):
        prolong(VectorField.from_text({"x1": "1"}), 4, U)


def test_evolutionary_prolongation_uses_total_derivatives():
    q = parse("diff(u,x1,x1) + u")
    pr = prolong(VectorField(characteristics={"u": q}), 1, U)
    assert pr.coefficient(jet("u", "x1")) == parse("diff(u,x1,x1,x1) + diff(u,x1)")


def test_dilation_prolongation():
    pr = prolong(VectorField.from_text({"x1": "x1", "x2": "-x2", "u": "0"}), 2, U)
    assert pr.coefficient(jet("u", "x1")) == parse("-diff(u,x1)")
    assert pr.coefficient(jet("u", "x1", "x2")) == 0
    assert pr.coefficient(jet("u", "x2", "x2")) == parse("2*diff(u,x2,x2)")


def test_bracket_examples():
    d2 = VectorField.from_text({"x1": "0", "x2": "1"})
    dil = VectorField.from_text({"x1": "x1", "x2": "-x2"})
    assert lie_bracket(d2, dil) == -1 * d2
    assert lie_bracket(d2, d2) == VectorField.from_text({"x1": "0", "x2": "0"})


def test_bracket_of_tangent_fields():
    S = JetSpace(("t", "x"), ("u",))
    K = VectorField.from_text({"t": "-t", "x": "diff(u,x)", "u": "diff(u,x)^2/2", "diff(u,x)": "0", "diff(u,t)": "diff(u,t)"})
    Pt = VectorField.from_text({"t": "1", "x": "0", "u": "0", "diff(u,t)": "0", "diff(u,x)": "0"})
    assert lie_bracket(K, Pt) == Pt
    assert is_contact(K, S) and is_contact(Pt, S)


def test_bracket_requires_shared_variables():
    with pytest.raises(ValueError):
        lie_bracket(VectorField.from_text({"x1": "1"}), VectorField.from_text({"x2": "1"}))


def test_q_symmetry_of_system3():
    rep = check_symmetry(VectorField.from_text(Q_COEFFS), system3(), R_SAMPLES)
    assert rep.verdict == "symbolic-zero"


def test_q_invariants():
    Q = VectorField.from_text(Q_COEFFS)
    for g in ("x2 - v2", "x1^(1/(r+1))*v1", "x1^(-r/(r+1))*v2"):
        assert check_invariant(Q, parse(g), V, R_SAMPLES).verdict == "symbolic-zero", g
    assert check_invariant(Q, parse("x1"), V, R_SAMPLES).verdict == "nonzero"


def test_non_symmetry_rejected():
    rep = check_symmetry(VectorField.from_text({"x1": "x1", "x2": "0", "v1": "0", "v2": "0"}), system3(), R_SAMPLES)
    assert rep.verdict == "nonzero"


def test_conditional_symmetry_of_wave_system():
    S = JetSpace(("x1", "x2", "x3"), ("u",))
    eqs = (
        Equation.from_text("diff(u,x1,x2) = sin(u)", lead="diff(u,x1,x2)"),
        Equation.from_text("diff(u,x3) = 0", lead="diff(u,x3)"),
    )
    sys_ = EquationSystem(eqs, S)
    d3 = VectorField.from_text({"x1": "0", "x2": "0", "x3": "1", "u": "0"})
    assert check_symmetry(d3, sys_).passed
    assert check_conditional_symmetry(d3, sys_).passed


def test_lie_backlund_x2():
    S = JetSpace(("x1",), ("u",))
    fns = {"h": 1}
    ode = Equation.from_text("diff(u,x1,x1) = -alpha^2*diff(u,x1)", lead="diff(u,x1,x1)")
    q = parse("exp(-alpha^2*x1)*h(diff(u,x1) + alpha^2*u)", fns)
    assert check_lie_backlund(q, ode, S).verdict == "symbolic-zero"
    assert check_lie_backlund(parse("u^2"), ode, S).verdict == "nonzero"


def test_invariance_condition_of_solution():
    family = VectorField.from_text({"x1": "beta*x1", "x2": "alpha - beta*x2", "u": "0"})
    sol = {"u": parse("C1*ln(C2/C1*x1*x2 + C3*x1)")}
    conds = invariance_condition_of_solution(family, sol, U, family=["C1", "C2", "C3"], nonzero=["C1"])
    assert conds == [parse("C3*beta + C2*alpha/C1")]


def test_invariance_condition_trivial_params():
    family = VectorField.from_text({"x1": "0", "x2": "0", "u": "0"})
    assert invariance_condition_of_solution(family, {"u": parse("C1*ln(x1)")}, U) == []
    shift = VectorField.from_text({"x1": "0", "x2": "alpha", "u": "0"})
    assert invariance_condition_of_solution(shift, {"u": parse("h(x1)", {"h": 1})}, U) == []


def test_verdict_numeric_and_nonzero():
    assert verdict_for([parse("x1*(x2 + 1) - x1*x2 - x1")]).verdict == "symbolic-zero"
    # trig identities are left to the sampler
    rep = verdict_for([parse("sin(x1)^2 + cos(x1)^2 - 1")])
    assert rep.verdict == "numeric-zero" and rep.samples == 200 and rep.max_abs < 1e-10
    rep = verdict_for([parse("x1 - x2")], SamplingConfig(samples=20))
    assert rep.verdict == "nonzero" and rep.max_abs > 0


# Properties

ALGEBRA = [
    VectorField.from_text({"x1": "1", "x2": "0"}),
    VectorField.from_text({"x1": "0", "x2": "1"}),
    VectorField.from_text({"x1": "x1", "x2": "-x2"}),
]
coeffs = st.integers(-3, 3)


@settings(max_examples=40)
@given(st.lists(coeffs, min_size=3, max_size=3), st.lists(coeffs, min_size=3, max_size=3))
def test_bracket_antisymmetry(a, b):
    X = a[0] * ALGEBRA[0] + a[1] * ALGEBRA[1] + a[2] * ALGEBRA[2]
    Y = b[0] * ALGEBRA[0] + b[1] * ALGEBRA[1] + b[2] * ALGEBRA[2]
    assert lie_bracket(X, Y) == -1 * lie_bracket(Y, X)


def test_bracket_jacobi():
    for X in ALGEBRA:
        for Y in ALGEBRA:
            for Z in ALGEBRA:
                j = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
                assert j == VectorField.from_text({"x1": "0", "x2": "0"})


@settings(max_examples=30)
@given(coeffs, coeffs)
def test_prolongation_is_linear(a, b):
    X = VectorField.from_text({"x1": "x1*u", "x2": "0", "u": "x2"})
    Y = VectorField.from_text({"x1": "0", "x2": "u^2", "u": "x1"})
    lhs = prolong(a * X + b * Y, 2, U)
    rhs = a * prolong(X, 2, U) + b * prolong(Y, 2, U)
    assert lhs == rhs


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_symbolic_zero_survives_cross_check(seed):
    rep = check_symmetry(VectorField.from_text(Q_COEFFS), system3(), R_SAMPLES.with_seed(seed))
    assert rep.verdict == "symbolic-zero"
    assert rep.max_abs is not None and rep.max_abs < 1e-12


def test_q_invariants_constant_along_flow():
    r = 2.0
    invariants = [parse(g).subs(sp.Symbol("r"), 2) for g in ("x2 - v2", "x1^(1/(r+1))*v1", "x1^(-r/(r+1))*v2")]

    def rhs(s, y):
        x1, x2, v1, v2 = y
        return np.array([(r + 1) * x1, r * v2, -v1, r * v2])

    y0 = np.array([0.7, 0.3, 1.2, -0.4])
    traj = integrate_ode(rhs, y0, 0.0, 0.5, h=1e-3)
    names = ("x1", "x2", "v1", "v2")
    start = [evaluate(g, dict(zip(names, y0))) for g in invariants]
    drift = max(
        abs(evaluate(g, dict(zip(names, y))) - s0) for y in traj.ys[::50] for g, s0 in zip(invariants, start)
    )
    assert drift < 1e-8
