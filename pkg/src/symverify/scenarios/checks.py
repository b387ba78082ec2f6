"""Check handlers: one function per check kind, each returning an Outcome."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from ..expr import canonical, differentiate, jet_base, jet_index, is_zero, normalize, substitute, substitute_function, symbol, to_text
from ..jet import JetSpace, implicit_derivative, total_derivative
from ..numerics import Grid, ImplicitSolution, NewtonError, fd_residual, integrate_ode, newton_solve
from ..reduction import apply_ansatz, compare_reduced, compatibility_conditions, constant_ratio, corresponding_system, hodograph_transform, is_linear_system
from ..solutions import QuadratureSolution, backlund_verify, phi2_quadrature_identity, verify_solution_33d
from ..symmetry import (
    InvarianceReport,
    apply_field,
    check_conditional_symmetry,
    check_invariant,
    check_lie_backlund,
    check_symmetry,
    invariance_condition_of_solution,
    is_contact,
    lie_bracket,
    verdict_for,
)
from .model import Scenario

__all__ = ["Outcome", "HANDLERS"]


@dataclass
class Outcome:
    holds: bool
    max_residual: float | None
    details: str


def _from_report(rep: InvarianceReport, prefix: str = "") -> Outcome:
    return Outcome(rep.passed, rep.max_abs, (prefix + rep.describe()).strip())


def _grid(c: dict) -> Grid:
    g = c["grid"]
    return Grid(tuple((n, lo, hi) for n, (lo, hi) in g["axes"].items()), g["h"])


def _substitute_functions(sc: Scenario, e, bodies: dict, extra=None):
    for name, spec in bodies.items():
        e = substitute_function(e, name, spec["params"], sc.parse(spec["body"], extra))
    return e


def check_symmetry_kind(sc, c, seed):
    rep = check_symmetry(sc.operator(c["operator"]), sc.system(c["system"]), sc.sampling(c, seed))
    return _from_report(rep)


def check_conditional_kind(sc, c, seed):
    rep = check_conditional_symmetry(sc.operator(c["operator"]), sc.system(c["system"]), sc.sampling(c, seed))
    return _from_report(rep)


def check_lie_backlund_kind(sc, c, seed):
    eq = sc.equation(c["equation"])
    rep = check_lie_backlund(sc.parse(c["characteristic"]), eq, sc.equation_space(c["equation"]), sc.sampling(c, seed))
    return _from_report(rep)


def check_invariant_kind(sc, c, seed):
    space = sc.space(c["space"]) if "space" in c else None
    rep = check_invariant(sc.operator(c["operator"]), sc.parse(c["expression"]), space, sc.sampling(c, seed))
    return _from_report(rep, f"{c['expression']}: ")


def contact_kind(sc, c, seed):
    ok = is_contact(sc.operator(c["operator"]), sc.space(c["space"]))
    return Outcome(ok, None, "jet coefficients agree with the prolongation formula" if ok else "contact condition violated")


def lie_bracket_kind(sc, c, seed):
    br = lie_bracket(sc.operator(c["left"]), sc.operator(c["right"]))
    expected = sc.operator(c["expected_operator"])
    ok = br == expected
    return Outcome(ok, None, f"[{c['left']}, {c['right']}] = {br!r}")


def _match_residuals(produced, expected, variables):
    notes, ok = [], True
    for e in expected:
        hit = next((i for i, p in enumerate(produced) if constant_ratio(e, p, variables) is not None), None)
        ok &= hit is not None
        notes.append(f"{to_text(e)}: {'matches equation ' + str(hit + 1) if hit is not None else 'no match'}")
    return ok, notes


def corresponding_system_kind(sc, c, seed):
    eq = sc.equation(c["equation"])
    space = sc.equation_space(c["equation"])
    sys_ = corresponding_system(eq, space, c.get("names"))
    expected = []
    for text in c["expected"]:
        lhs, _, rhs = text.partition("=")
        expected.append(canonical(sc.parse(lhs) - sc.parse(rhs)) if rhs else sc.parse(lhs))
    variables = set(sys_.space.independent)
    ok, notes = _match_residuals(sys_.residuals, expected, variables)
    ok &= len(sys_.equations) == len(expected)
    produced = "; ".join(f"{to_text(r)} = 0" for r in sys_.residuals)
    return Outcome(ok, None, f"system: {produced}. " + "; ".join(notes))


def implicit_derivative_kind(sc, c, seed):
    ans = sc.ansatz(c["ansatz"])
    value = implicit_derivative(ans.relations(), c["target"], c["wrt"], ans.jet_space)
    expected = sc.parse(c["expected"])
    rep = verdict_for([value - expected], sc.sampling(c, seed))
    return _from_report(rep, f"{c['target']} = {to_text(value)}; ")


def reduce_and_compare_kind(sc, c, seed):
    ans = sc.ansatz(c["ansatz"])
    target = sc.system(c["system"]) if "system" in c else sc.equation(c["equation"])
    red = apply_ansatz(target, ans)
    expected = [sc.parse(e) for e in c["expected"]]
    cmp = compare_reduced(red, expected)
    ok = cmp.passed and red.succeeded and red.k1 <= red.m and red.k1 == len(expected)
    eqs = "; ".join(f"{to_text(e)} = 0" for e in red.equations)
    lcd = ", ".join(to_text(d) for d in red.lcds)
    details = (
        f"reduced: {eqs} (k1 = {red.k1}, m = {red.m}, leftover {to_text(red.leftover)}, lcd {lcd}). {cmp.details}"
    )
    return Outcome(ok, None, details)


def compatibility_kind(sc, c, seed):
    ans = sc.ansatz(c["ansatz"])
    conds = compatibility_conditions(ans)
    extra = c.get("extra_functions")
    conds = [_substitute_functions(sc, e, c.get("substitute", {}), extra) for e in conds]
    expected = [sc.parse(e, extra) for e in c.get("expected", [])] or [sp.Integer(0)] * len(conds)
    if len(expected) != len(conds):
        return Outcome(False, None, f"{len(conds)} conditions, {len(expected)} expected")
    cfg = sc.sampling(c, seed)
    reps = [verdict_for([a - e], cfg) for a, e in zip(conds, expected)]
    worst = max((r.max_abs or 0.0 for r in reps), default=0.0)
    text = "; ".join(f"{to_text(normalize(a - e))}: {r.verdict}" for a, e, r in zip(conds, expected, reps))
    return Outcome(all(r.passed for r in reps), worst, text)


# ---- verify-solution methods ---------------------------------------------------------------


def _vs_substitute(sc, c, seed):
    cfg = sc.sampling(c, seed)
    extra = c.get("extra_functions")
    notes, worst, ok = [], 0.0, True
    for text in c["residuals"]:
        e = _substitute_functions(sc, sc.parse(text, extra), c["functions"], extra)
        rep = verdict_for([e], cfg)
        ok &= rep.passed
        worst = max(worst, rep.max_abs or 0.0) if rep.max_abs is not None else worst
        notes.append(f"{text} -> {to_text(normalize(e))} [{rep.verdict}]")
    return Outcome(ok, worst, "; ".join(notes))


def _jet_values(space: JetSpace, residual, solution: dict):
    rules = {}
    for J in space.jet_variables(residual):
        expr = solution[jet_base(J)]
        for x in jet_index(J):
            expr = differentiate(expr, x)
        rules[J] = expr
    return rules


def _vs_explicit(sc, c, seed):
    eq = sc.equation(c["equation"])
    space = sc.equation_space(c["equation"])
    sol = {k: sc.parse(v) for k, v in c["solution"].items()}
    value = substitute(eq.residual, _jet_values(space, eq.residual, sol))
    rep = verdict_for([value], sc.sampling(c, seed))
    return _from_report(rep, f"{to_text(eq.residual)} with {c['solution']}: ")


def _sampler_functions(sc, c):
    from ..sampling import ExprSampler

    out = {}
    for name, spec in c.get("function_bodies", {}).items():
        out[name] = ExprSampler(sc.parse(spec["body"]), [symbol(p) for p in spec["params"]])
    return out


def _vs_fd_explicit(sc, c, seed):
    eq = sc.equation(c["equation"])
    space = sc.equation_space(c["equation"])
    u = sc.parse(c["solution"])
    params = {k: float(v) for k, v in c.get("values", {}).items()}
    grid = _grid(c)
    fns = _sampler_functions(sc, c)
    names = grid.names

    def ev(**pts):
        from ..expr import evaluate

        env = dict(params)
        env.update(pts)
        return np.broadcast_to(np.asarray(evaluate(u, env, fns), dtype=float), pts[names[0]].shape)

    rep = fd_residual(eq, ev, grid, space.dependent[0], fns, params, richardson=c.get("richardson", False))
    ok = rep.max_residual <= c["tolerance"]
    return Outcome(ok, rep.max_residual, f"max {rep.max_residual:.3g}, mean {rep.mean_residual:.3g} over {rep.nodes} nodes, h = {rep.h}")


def _implicit(sc, c):
    return ImplicitSolution(
        sc.parse(c["relation"]),
        sc.parse(c["target"]),
        c["unknown"],
        tuple(c["grid"]["axes"]),
        c["values"],
        sc.parse(c["initial"]),
        tol=c.get("newton_tolerance", 1e-12),
    )


def _vs_implicit(sc, c, seed):
    sol = _implicit(sc, c)
    eq = sc.equation(c["equation"])
    space = sc.equation_space(c["equation"])
    grid = _grid(c)
    rep = fd_residual(eq, sol, grid, space.dependent[0], None, c["values"], richardson=True)
    newton_ok = sol.max_relation_residual < c.get("newton_tolerance", 1e-12)
    fd_ok = rep.max_residual < c["tolerance"]
    ratio_ok = rep.ratio is not None and rep.ratio >= c.get("min_ratio", 3.0)
    details = (
        f"Newton back-substitution max {sol.max_relation_residual:.3g} (max {sol.iterations} iterations); "
        f"FD max {rep.max_residual:.3g} at h = {rep.h}, {rep.max_residual_half:.3g} at h/2, ratio {rep.ratio:.3f}"
    )
    return Outcome(newton_ok and fd_ok and ratio_ok, rep.max_residual, details)


def _vs_newton_point(sc, c, seed):
    rel = sc.parse(c["relation"])
    unknown = symbol(c["unknown"])
    env = {k: float(v) for k, v in c["values"].items()}
    from ..expr import evaluate

    f = lambda th: evaluate(rel, {**env, unknown.name: th})
    df = lambda th: evaluate(differentiate(rel, unknown), {**env, unknown.name: th})
    try:
        res = newton_solve(f, float(c["guess"]), 1e-12, 50, df=df)
    except NewtonError as exc:
        return Outcome(False, None, f"no root: {exc}")
    return Outcome(abs(f(res.root)) < 1e-12, float(abs(f(res.root))), f"root {res.root!r} after {res.iterations} iterations")


def _vs_quadrature(sc, c, seed):
    grid = _grid(c)
    rep = verify_solution_33d(c["F"], c["h"], c["phi1"], c["alpha"], c["C1"], grid, richardson=c.get("richardson", True))
    ok = rep.max_residual < c["tolerance"] if c["tolerance"] > 0 else rep.max_residual == 0
    extra = f", h/2 {rep.max_residual_half:.3g}, ratio {rep.ratio:.3f}" if rep.ratio is not None else ""
    return Outcome(ok, rep.max_residual, f"F = {c['F']}, h = {c['h']}, phi1 = {c['phi1']}: FD max {rep.max_residual:.3g}{extra}")


def _vs_ode_closed_form(sc, c, seed):
    sol = QuadratureSolution(c["F"], c["h"], c["phi1"], c["alpha"], c["C1"])
    a2 = c["alpha"] ** 2
    Ff, hf, p1 = sol._F, sol._h, sol._phi1
    rhs = lambda x, y: y * Ff(0, a2 * float(p1(x))) - hf(0, a2 * float(p1(x))) / a2
    x_end = c["x_end"]
    traj = integrate_ode(rhs, c["C1"], 0.0, x_end, c.get("step", 1e-3))
    err = abs(float(traj.at_end()) - sol.phi2(x_end))
    return Outcome(err < c["tolerance"], err, f"RK4 {float(traj.at_end())!r} vs quadrature {float(sol.phi2(x_end))!r}")


def _vs_quadrature_value(sc, c, seed):
    sol = QuadratureSolution(c["F"], c["h"], c["phi1"], c["alpha"], c["C1"])
    expected = float(sp.N(sc.parse(c["expected"])))
    got = sol.H(c["x"])
    err = abs(got - expected)
    return Outcome(err < c["tolerance"], err, f"H({c['x']}) = {got!r}, closed form {expected!r}")


def _vs_identity(sc, c, seed):
    if c["identity"] != "phi2-quadrature":
        raise ValueError(f"unknown identity {c['identity']!r}")
    e = phi2_quadrature_identity()
    ok = is_zero(e)
    return Outcome(ok, 0.0 if ok else None, f"residual {to_text(normalize(e))}")


_METHODS = {
    "substitute": _vs_substitute,
    "explicit": _vs_explicit,
    "fd-explicit": _vs_fd_explicit,
    "implicit": _vs_implicit,
    "newton-point": _vs_newton_point,
    "quadrature": _vs_quadrature,
    "ode-closed-form": _vs_ode_closed_form,
    "quadrature-value": _vs_quadrature_value,
    "identity": _vs_identity,
}


def verify_solution_kind(sc, c, seed):
    return _METHODS[c["method"]](sc, c, seed)


def backlund_kind(sc, c, seed):
    rep = backlund_verify(sc.parse(c["w"]), c["k"], _grid(c))
    tol = c["tolerance"]
    ok = rep.target_residual < tol and rep.relation_residual < tol and rep.seed_residual < c.get("seed_tolerance", 1e-9)
    if tol == 0:
        ok = rep.target_residual == 0 and rep.relation_residual == 0
    details = (
        f"seed residual {rep.seed_residual:.3g}, x1 relation {rep.relation_residual:.3g}, "
        f"target {rep.target_residual:.3g}, step halving {rep.step_halving:.3g}, min cos(u - w) {rep.min_guard:.3g}"
    )
    return Outcome(ok, rep.max_residual, details)


def hodograph_kind(sc, c, seed):
    sys_ = sc.system(c["system"])
    out = hodograph_transform(sys_)
    linear = is_linear_system(out)
    deps = {sp.Symbol(d) for d in out.space.dependent}
    free_of_x = all(not (sp.diff(r, J).free_symbols & deps) for r in out.residuals for J in out.space.jet_variables(r))
    expected = [sc.parse(e) for e in c.get("expected", [])]
    ok, notes = _match_residuals(out.residuals, expected, set(out.space.independent))
    ok = ok and linear and free_of_x
    produced = "; ".join(f"{to_text(r)} = 0" for r in out.residuals)
    return Outcome(ok, None, f"transformed: {produced} (linear: {linear}). " + "; ".join(notes))


def invariance_condition_kind(sc, c, seed):
    vf = sc.operator(c["operator"])
    sol = {k: sc.parse(v) for k, v in c["solution"].items()}
    conds = invariance_condition_of_solution(vf, sol, sc.space(c["space"]), c.get("family", []), c.get("nonzero", []))
    expected = [sc.parse(e) for e in c["expected"]]
    ok = len(conds) == len(expected) and all(any(is_zero(a - e) for a in conds) for e in expected)
    shown = "; ".join(f"{to_text(a)} = 0" for a in conds) or "0 = 0"
    return Outcome(ok, None, f"condition: {shown}")


def determining_equation_kind(sc, c, seed):
    f = sc.parse(c["function"])
    total = sp.Integer(0)
    for a, b, coef in c["terms"]:
        total += sc.parse(coef) * differentiate(differentiate(f, a), b)
    rep = verdict_for([total], sc.sampling(c, seed))
    return _from_report(rep)


HANDLERS = {
    "check-symmetry": check_symmetry_kind,
    "check-conditional": check_conditional_kind,
    "check-lie-backlund": check_lie_backlund_kind,
    "check-invariant": check_invariant_kind,
    "contact-condition": contact_kind,
    "lie-bracket": lie_bracket_kind,
    "corresponding-system": corresponding_system_kind,
    "implicit-derivative": implicit_derivative_kind,
    "reduce-and-compare": reduce_and_compare_kind,
    "compatibility": compatibility_kind,
    "verify-solution": verify_solution_kind,
    "backlund": backlund_kind,
    "hodograph": hodograph_kind,
    "invariance-condition": invariance_condition_kind,
    "determining-equation": determining_equation_kind,
}
