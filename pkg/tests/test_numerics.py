import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symverify.expr import evaluate, parse
from symverify.jet import Equation
from symverify.numerics import (
    CumulativeIntegral,
    Grid,
    ImplicitSolution,
    NewtonError,
    fd_residual,
    integrate_ode,
    newton_solve,
    quadrature,
    rk4_order,
)

THETA = "theta - t^(r/(r+1))*sqrt(2*(r+1)/(r*(r-1)))*(sqrt(r*(r+1)/(2*(r-1)))*(x - theta) + C1)^((1-r)/(r+1))"


def test_newton_square_root():
    res = newton_solve(lambda z: z * z - 4, 3.0)
    assert abs(res.root - 2) < 1e-14


def test_newton_zero_derivative():
    with pytest.raises(NewtonError):
        newton_solve(lambda z: z * z + 1, 0.0, df=lambda z: 2 * z)


def test_newton_quadratic_convergence():
    res = newton_solve(lambda z: z * z - 2, 1.0, tol=1e-15, polish=0)
    errs = [h for h in res.history if h > 1e-13]
    rates = [math.log(errs[i + 1]) / math.log(errs[i]) for i in range(1, len(errs) - 1)]
    assert rates and min(rates) > 1.8


def test_newton_array():
    res = newton_solve(lambda z: z**3 - np.array([1.0, 8.0, 27.0]), np.ones(3) * 2)
    assert np.allclose(res.root, [1, 2, 3], atol=1e-13)


def test_theta_has_no_root_at_c1_zero():
    g = parse(THETA)
    env = {"r": 2.0, "C1": 0.0, "t": 1.0, "x": 1.0}
    # real branch needs theta < x; the relation stays negative there, so no sign change to bisect
    vals = np.array([evaluate(g, {**env, "theta": th}) for th in np.linspace(-60, 0.999999, 2001)])
    assert np.all(vals < 0)
    with pytest.raises(NewtonError):
        newton_solve(lambda th: evaluate(g, {**env, "theta": th}), 0.5)


def test_theta_root_at_c1_five():
    g = parse(THETA)
    env = {"r": 2.0, "C1": 5.0, "t": 1.5, "x": 1.5}
    res = newton_solve(lambda th: evaluate(g, {**env, "theta": th}), 1.0)
    assert abs(evaluate(g, {**env, "theta": res.root})) < 1e-12


def test_rk4_exponential():
    traj = integrate_ode(lambda x, y: y, 1.0, 0.0, 1.0, h=1e-3)
    assert abs(traj.at_end() - math.e) < 1e-8


def test_rk4_backwards():
    traj = integrate_ode(lambda x, y: y, math.e, 1.0, 0.0, h=1e-3)
    assert abs(traj.at_end() - 1.0) < 1e-8


def test_rk4_from_equations():
    eqs = [Equation.from_text("diff(y,x) = -y", lead="diff(y,x)")]
    traj = integrate_ode(eqs, [1.0], 0.0, 2.0, h=1e-3, unknowns=["y"])
    assert abs(traj.at_end()[0] - math.exp(-2)) < 1e-10


def test_rk4_order():
    p = rk4_order(lambda x, y: y, 1.0, 0.0, 1.0, math.e)
    assert 3.8 <= p <= 4.2


def test_quadrature_examples():
    r = quadrature(lambda x: x * x, 0, 1)
    assert abs(r.value - 1 / 3) < 1e-14
    r = quadrature(math.sin, 0, math.pi)
    assert abs(r.value - 2) < 1e-10
    assert abs(r.value - 2) <= r.error + 1e-13


def test_cumulative_integral():
    ci = CumulativeIntegral(math.cos, 0.0, 0.1)
    for x in (0.0, 0.35, 1.0, 2.05, -0.3):
        assert abs(ci(x) - math.sin(x)) < 1e-12


def test_fd_exact_on_quadratics():
    grid = Grid((("x1", 0, 1), ("x2", 0, 1)), 0.01)
    eq = Equation(parse("diff(u,x1,x1) + diff(u,x1,x2) - 2*diff(u,x2,x2) - 5"))
    rep = fd_residual(eq, lambda x1, x2: x1**2 + x1 * x2 - x2**2 / 2, grid)
    assert rep.max_residual < 1e-8


def test_fd_free_wave_solution():
    # u = C1 ln(C2/C1 x1 x2 + C3 x1) with C = 1 solves u_x1x2 = 0
    grid = Grid((("x1", 1, 2), ("x2", 1, 2)), 0.01)
    rep = fd_residual(Equation(parse("diff(u,x1,x2)")), lambda x1, x2: np.log(x1 * x2 + x1), grid)
    assert rep.max_residual < 1e-9


def test_fd_single_axis_is_exact():
    grid = Grid((("x1", 1, 2), ("x2", 1, 2)), 0.01)
    rep = fd_residual(Equation(parse("diff(u,x1,x2)")), lambda x1, x2: np.exp(x1) + 0 * x2, grid)
    assert rep.max_residual == 0


def test_fd_convergence_ratio():
    grid = Grid((("x1", 0, 1), ("x2", 0, 1)), 0.02)
    rep = fd_residual(Equation(parse("diff(u,x1) - cos(x1)")), lambda x1, x2: np.sin(x1) + 0 * x2, grid)
    assert rep.richardson_ok and 3.5 < rep.ratio < 4.5


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((("x", 0, 1),), 0)
    with pytest.raises(ValueError):
        Grid((("x", 1, 1),), 0.1)


def test_implicit_solution_newton_residual():
    sol = ImplicitSolution(
        parse(THETA),
        parse("theta"),
        "theta",
        ("t", "x"),
        {"r": 2, "C1": 5},
        parse("x"),
    )
    t, x = np.meshgrid(np.linspace(1, 2, 21), np.linspace(1, 2, 21), indexing="ij")
    sol(t=t, x=x)
    assert sol.max_relation_residual < 1e-12


@settings(max_examples=50)
@given(st.floats(0.5, 10.0))
def test_newton_finds_square_roots(a):
    res = newton_solve(lambda z: z * z - a, max(a, 1.0))
    assert abs(res.root**2 - a) < 1e-11


@settings(max_examples=30)
@given(st.floats(-2.0, 2.0))
def test_rk4_linear_decay(lam):
    traj = integrate_ode(lambda x, y: lam * y, 1.0, 0.0, 1.0, h=1e-2)
    assert abs(traj.at_end() - math.exp(lam)) < 1e-8 * max(1.0, math.exp(lam))
