"""Ansatz substitution, compatibility conditions and reduced-system extraction."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import sympy as sp

from .expr import (
    OpaqueFunction,
    canonical,
    is_zero,
    jet,
    jet_base,
    jet_index,
    normalize,
    opaque_applications,
    raise_index,
    substitute,
    symbol,
    to_text,
)
from .jet import Equation, EquationSystem, ImplicitSystemError, JetSpace, implicit_derivatives, total_derivative
from .symmetry import InvarianceReport

__all__ = [
    "Ansatz",
    "ReducedSystem",
    "ReductionError",
    "corresponding_system",
    "apply_ansatz",
    "compatibility_conditions",
    "collect_by_basis",
    "compare_reduced",
    "constant_ratio",
    "hodograph_transform",
    "is_linear_system",
]


class ReductionError(ValueError):
    pass


@dataclass
class Ansatz:
    """Prescription of u (``kind="solution"``) or of first derivatives (``kind="derivative"``).

    ``prescriptions`` maps jet variables of ``space`` to expressions in the
    independents, the invariants and the unknown functions. ``invariants``
    maps auxiliary names (omega, ...) to their definitions; they may involve
    u and its first derivatives, in which case derivatives are obtained by
    implicit differentiation. ``variable`` is the argument of the reduced
    ODEs. ``directions`` says which derivative a prescribed dependent of a
    corresponding system stands for, e.g. ``{"v1": "x1", "v2": "x2"}``.
    """

    kind: str
    space: JetSpace
    prescriptions: Mapping
    functions: Mapping[str, int]
    variable: sp.Symbol | str | None = None
    invariants: Mapping = field(default_factory=dict)
    directions: Mapping = field(default_factory=dict)
    basis: Sequence = (1,)
    arguments: Sequence = ()

    def __post_init__(self):
        if self.kind not in ("derivative", "solution"):
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        self.prescriptions = {symbol(k): canonical(sp.sympify(v)) for k, v in self.prescriptions.items()}
        self.invariants = {str(k): canonical(sp.sympify(v)) for k, v in self.invariants.items()}
        self.directions = {str(k): symbol(v) for k, v in self.directions.items()}
        self.variable = symbol(self.variable) if self.variable is not None else None
        self.basis = tuple(canonical(sp.sympify(b)) for b in self.basis)
        self.functions = dict(self.functions)
        args = {symbol(a) for a in self.arguments} | {sp.Symbol(n) for n in self.invariants}
        if self.variable is not None:
            args.add(self.variable)
        self.arguments = tuple(sorted(args, key=sp.default_sort_key))
        self._validate()

    def _validate(self):
        for lead, rhs in self.prescriptions.items():
            if not self.space.is_jet_variable(lead):
                raise ValueError(f"{to_text(lead)} is not a jet variable of the system")
            if self.kind == "derivative" and self.space.order(rhs) > 1:
                raise ValueError(f"prescription for {to_text(lead)} has order > 1")
            for app in opaque_applications(rhs):
                if app.opaque_name in self.functions and not all(a in self.arguments for a in app.args):
                    raise ValueError(f"{app.opaque_name} applied to undeclared arguments in {to_text(rhs)}")
        for name, d in self.invariants.items():
            if self.space.order(d) > 1:
                raise ValueError(f"invariant {name} has order > 1")

    @property
    def m(self) -> int:
        return len(self.functions)

    @property
    def jet_space(self) -> JetSpace:
        return self.space.with_auxiliary(self.invariants)

    @property
    def eliminated(self) -> set:
        return {x for x in self.space.independent if x not in self.arguments}

    def relations(self) -> list[Equation]:
        out = [Equation(lead - rhs, lead, rhs, f"ansatz {to_text(lead)}") for lead, rhs in self.prescriptions.items()]
        for name, d in self.invariants.items():
            w = sp.Symbol(name)
            out.append(Equation(w - d, w, d, f"invariant {name}"))
        return out

    def derivative_of(self, lead) -> tuple:
        """``(group, x)``: the prescribed ``lead`` stands for ``D_x`` of a potential.

        Jets ``u_x`` belong to group ``u``; dependents listed in ``directions``
        (``v1 = u_x1``, ``v2 = u_x2``) share one group. ``x`` is None when the
        lead is not a first derivative.
        """
        idx = jet_index(lead)
        if len(idx) == 1:
            return jet_base(lead), sp.Symbol(idx[0])
        if not idx and jet_base(lead) in self.directions:
            return None, self.directions[jet_base(lead)]
        return jet_base(lead), None


@dataclass
class ReducedSystem:
    equations: list
    basis: tuple
    leftover: sp.Expr
    m: int
    variables: frozenset = frozenset()
    sources: list = field(default_factory=list)
    lcds: list = field(default_factory=list)
    factors: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def k1(self) -> int:
        return len(self.equations)

    @property
    def succeeded(self) -> bool:
        return self.leftover == 0


def _direction_values(ans: Ansatz, x) -> dict:
    space = ans.jet_space
    rels = ans.relations()
    leads = {r.lead for r in rels}
    present = set()
    for r in rels:
        present |= set(space.jet_variables(r.residual))
    new = set()
    for r in rels:
        new |= set(space.jet_variables(total_derivative(r.residual, x, space)))
    unknowns = sorted(new - present - leads, key=sp.default_sort_key)
    return implicit_derivatives(rels, x, space, unknowns=unknowns)


class _Values:
    """Lazy per-direction jet values of an ansatz."""

    def __init__(self, ans: Ansatz):
        self.ans = ans
        self._dirs: dict = {}

    def direction(self, x):
        if x not in self._dirs:
            self._dirs[x] = _direction_values(self.ans, x)
        return self._dirs[x]

    def routes(self, J) -> dict:
        """Possible values of ``J`` keyed by the direction of the last derivative."""
        ans = self.ans
        if J in ans.prescriptions:
            return {None: ans.prescriptions[J]}
        if ans.kind == "solution":
            base = sp.Symbol(jet_base(J))
            if base not in ans.prescriptions:
                return {}
            return {None: canonical(sp.diff(ans.prescriptions[base], *[sp.Symbol(i) for i in jet_index(J)]))}
        out = {}
        for i in sorted(set(jet_index(J))):
            x = sp.Symbol(i)
            idx = list(jet_index(J))
            idx.remove(i)
            parent = jet(jet_base(J), *idx)
            if parent in ans.prescriptions:
                vals = self.direction(x)
                if J in vals:
                    out[x] = vals[J]
        return out


def _substitute_routes(residual, values: _Values, space: JetSpace):
    """One substituted residual per route choice of the multi-route jets."""
    jets = space.jet_variables(residual)
    fixed, multi = {}, {}
    for J in jets:
        r = values.routes(J)
        if not r:
            if jet_index(J):
                raise ReductionError(f"ansatz does not determine {to_text(J)}")
            continue
        if len(r) == 1:
            fixed[J] = next(iter(r.values()))
        else:
            multi[J] = r
    if not multi:
        return [(None, substitute(residual, fixed))]
    dirs = sorted({d for r in multi.values() for d in r}, key=sp.default_sort_key)
    out = []
    for d in dirs:
        rules = dict(fixed)
        for J, r in multi.items():
            rules[J] = r.get(d, next(iter(r.values())))
        out.append((d, substitute(residual, rules)))
    return out


def _split_term(t, eliminated):
    key, coef = [], []
    for f in sp.Mul.make_args(t):
        (key if f.free_symbols & eliminated else coef).append(f)
    return sp.Mul(*key), sp.Mul(*coef)


def collect_by_basis(residual, eliminated: Iterable, basis: Sequence = (1,)):
    """Split ``residual`` into one ODE per basis function.

    The residual is put over its least common denominator; the numerator's
    terms are grouped by their factor in the eliminated variables. The groups
    must be ``c * b`` for a common factor ``c`` and basis elements ``b``.
    Returns ``(equations, lcd, c, leftover)`` where ``equations`` lists
    ``(basis element, coefficient)`` pairs and
    ``sum(coefficient * b) * c + leftover`` equals the numerator.
    """
    eliminated = {symbol(x) for x in eliminated}
    basis = [canonical(sp.sympify(b)) for b in basis]
    r = normalize(residual)
    num, lcd = sp.fraction(r)
    if num == 0:
        return [], lcd, sp.Integer(1), sp.Integer(0)
    num = sp.expand(num, power_exp=True, power_base=False, mul=True, multinomial=True, log=False)
    groups: dict = {}
    order = []
    for t in sp.Add.make_args(num):
        k, c = _split_term(t, eliminated)
        k = canonical(k)
        if k not in groups:
            groups[k] = sp.Integer(0)
            order.append(k)
        groups[k] += c
    order.sort(key=sp.default_sort_key)
    for b0 in basis:
        common = canonical(order[0] / b0)
        mapping = {}
        for k in order:
            q = normalize(k / common)
            match = next((b for b in basis if is_zero(q - b)), None)
            if match is None:
                break
            mapping[k] = match
        else:
            eqs = {}
            for k in order:
                eqs[mapping[k]] = eqs.get(mapping[k], 0) + groups[k]
            out = []
            for b in basis:
                if b in eqs:
                    c = canonical(sp.expand(eqs[b]))
                    if c != 0:
                        out.append((b, c))
            return out, lcd, common, sp.Integer(0)
    return [], lcd, sp.Integer(1), canonical(num)


def equation_form(e):
    """Numerator of ``e = 0`` with nonvanishing exponential factors and numeric content removed."""
    num = sp.numer(sp.together(normalize(e)))
    num = sp.factor_terms(sp.expand(num))
    _, num = num.as_content_primitive()
    keep = [f for f in sp.Mul.make_args(num) if not (isinstance(f, sp.exp) or (f.is_Pow and isinstance(f.base, sp.exp)))]
    return canonical(sp.expand(sp.Mul(*keep)))


def constant_ratio(a, b, variables: Iterable = ()) -> sp.Expr | None:
    """``a / b`` when it is a nonzero constant (free of variables and unknown functions)."""
    variables = set(variables)
    if b == 0:
        return None
    a, b = equation_form(a), equation_form(b)
    if b == 0:
        return None
    q = normalize(a / b)
    if q == 0 or q.free_symbols & variables or opaque_applications(q):
        return None
    if any(s.name.startswith("diff(") for s in q.free_symbols):
        return None
    return q


def compatibility_conditions(ans: Ansatz) -> list:
    """Cross-derivative residuals ``D_j R_i - D_i R_j`` through the invariants."""
    if ans.kind != "derivative":
        raise ReductionError("compatibility conditions need a derivative ansatz")
    values = _Values(ans)
    derivs = []
    for lead in ans.prescriptions:
        group, x = ans.derivative_of(lead)
        if x is not None:
            derivs.append((lead, x, group))
    out = []
    for i, (li, xi, gi) in enumerate(derivs):
        for lj, xj, gj in derivs[i + 1 :]:
            if xi == xj or gi != gj:
                continue
            a = values.direction(xj)[raise_index(li, xj)]
            b = values.direction(xi)[raise_index(lj, xi)]
            out.append(canonical(a - b))
    return out


def _already_implied(c, known: list, route_pairs: list, variables) -> bool:
    if normalize(c) == 0:
        return True
    for k in known:
        if constant_ratio(c, k, variables) is not None:
            return True
    for a, b in route_pairs:
        if constant_ratio(c, canonical(a - b), variables) is not None:
            return True
    return False


def apply_ansatz(system, ans: Ansatz) -> ReducedSystem:
    """Substitute the ansatz and extract the reduced ODEs.

    Every equation of the system is substituted once per route (a jet with
    two prescribed parents gets one version per parent); compatibility
    conditions not already implied are appended. Each residual is collected
    over the declared basis; any x-dependence that does not factor through
    the basis is returned as leftover.
    """
    if isinstance(system, Equation):
        system = EquationSystem((system,), ans.space)
    space = ans.jet_space
    variables = set(ans.space.independent) | set(ans.arguments)
    values = _Values(ans)
    raw, sources, route_pairs = [], [], []
    steps = []
    for eq in system.equations:
        subs = _substitute_routes(eq.residual, values, space)
        for d, r in subs:
            raw.append(r)
            label = eq.name or to_text(eq.residual)
            sources.append(label if d is None else f"{label} [via {d}]")
            steps.append(f"substituted {label}{'' if d is None else f' via {d}'}: {to_text(r)}")
        if len(subs) > 1:
            route_pairs.extend((subs[0][1], s[1]) for s in subs[1:])
    if ans.kind == "derivative":
        for c in compatibility_conditions(ans):
            if _already_implied(c, raw, route_pairs, variables):
                steps.append(f"compatibility condition implied: {to_text(c)}")
                continue
            raw.append(c)
            sources.append("compatibility")
            steps.append(f"compatibility condition: {to_text(c)}")
    equations, lcds, factors, out_sources = [], [], [], []
    leftover = sp.Integer(0)
    for r, src in zip(raw, sources):
        eqs, lcd, common, left = collect_by_basis(r, ans.eliminated, ans.basis)
        lcds.append(lcd)
        factors.append(common)
        if left != 0:
            leftover = leftover + left
            steps.append(f"irreducible x-dependence in {src}: {to_text(left)}")
            continue
        for b, c in eqs:
            c = equation_form(c)
            if any(constant_ratio(c, e, variables) is not None for e in equations):
                continue
            equations.append(c)
            out_sources.append(src if b == 1 else f"{src} [coefficient of {to_text(b)}]")
            steps.append(f"reduced equation from {src}: {to_text(c)} = 0 (lcd {to_text(lcd)}, factor {to_text(common)})")
    return ReducedSystem(
        equations,
        ans.basis,
        canonical(leftover),
        ans.m,
        frozenset(variables),
        out_sources,
        lcds,
        factors,
        steps,
    )


def compare_reduced(actual: ReducedSystem | Sequence, expected: Sequence, variables: Iterable = ()) -> InvarianceReport:
    """Each expected residual must be a nonzero constant multiple of an actual one."""
    if isinstance(actual, ReducedSystem):
        variables = set(variables) | set(actual.variables)
        actual = actual.equations
    expected = [canonical(sp.sympify(e)) for e in expected]
    diffs, notes = [], []
    ok = True
    for e in expected:
        hit = None
        for i, a in enumerate(actual):
            q = constant_ratio(e, a, variables)
            if q is not None:
                hit = (i, q)
                break
        if hit is not None:
            diffs.append(sp.Integer(0))
            notes.append(f"{to_text(e)}: matches equation {hit[0] + 1} with ratio {to_text(hit[1])}")
            continue
        ok = False
        best = None
        for a in actual:
            for s in (1, -1):
                d = normalize(e - s * a)
                size = sp.count_ops(d)
                if best is None or size < best[0]:
                    best = (size, d)
        diff = best[1] if best else e
        diffs.append(diff)
        notes.append(f"{to_text(e)}: no match, closest difference {to_text(diff)}")
    return InvarianceReport("symbolic-zero" if ok else "nonzero", tuple(diffs), details="; ".join(notes))


def corresponding_system(eq: Equation, space: JetSpace, names: Sequence[str] | None = None) -> EquationSystem:
    """First-order system equivalent to a second-order equation in one dependent u.

    Generic route: ``v_i = u_{x_i}``, the cross-derivative condition, and the
    rewritten equation (plus ``u_{x_i} = v_i`` when u itself occurs). When the
    equation involves only second derivatives (at least two of them, or
    three ``names`` are given), each second derivative becomes
    a new dependent (``u_00, u_01, u_11 -> v1, v2, v3``), the solved variable is
    eliminated, and the two compatibility conditions close the system.
    """
    if len(space.dependent) != 1 or len(space.independent) != 2:
        raise ReductionError("corresponding_system expects one dependent and two independent variables")
    order = space.order(eq.residual)
    if order > 2:
        raise ReductionError(f"equation of order {order} > 2")
    u = space.dependent[0]
    x0, x1 = space.independent
    jets = space.jet_variables(eq.residual)
    second_only = order == 2 and all(len(jet_index(J)) == 2 for J in jets) and eq.lead is not None
    # a single second derivative needs no elimination, so v1, v2 suffice
    three = len(names) == 3 if names else len(jets) >= 2
    if second_only and three:
        return _second_order_system(eq, space, names or ("v1", "v2", "v3"))
    names = names or ("v1", "v2")
    v = [sp.Symbol(n) for n in names]
    new_space = JetSpace(space.independent, tuple(names) + ((u,) if sp.Symbol(u) in eq.residual.free_symbols else ()))
    rules = {jet(u, x0): v[0], jet(u, x1): v[1], jet(u, x0, x0): jet(names[0], x0), jet(u, x0, x1): jet(names[0], x1), jet(u, x1, x1): jet(names[1], x1)}
    residual = substitute(eq.residual, rules)
    lead = rules.get(eq.lead) if eq.lead is not None else None
    compat_lead = jet(names[0], x1)
    if lead == compat_lead:
        compat_lead = jet(names[1], x0)
    compat = Equation(jet(names[0], x1) - jet(names[1], x0), name="compatibility").solved_for(compat_lead)
    main = Equation(residual, name=eq.name or "equation")
    if lead is not None:
        main = main.solved_for(lead)
    eqs = [compat, main]
    if u in new_space.dependent:
        eqs += [Equation(jet(u, x) - vi, name=f"{u}_{x}").solved_for(jet(u, x)) for x, vi in zip((x0, x1), v)]
    return EquationSystem(tuple(eqs), new_space, (eq.name or "") + " corresponding")


def _second_order_system(eq: Equation, space: JetSpace, names) -> EquationSystem:
    u = space.dependent[0]
    x0, x1 = space.independent
    v1, v2, v3 = (sp.Symbol(n) for n in names)
    rules = {jet(u, x0, x0): v1, jet(u, x0, x1): v2, jet(u, x1, x1): v3}
    lead = rules[eq.lead]
    rhs = substitute(eq.replacement, rules)
    new_space = JetSpace(space.independent, tuple(names))
    algebraic = Equation(lead - rhs, name="algebraic").solved_for(lead)
    # D_{x1} v1 = D_{x0} v2 and D_{x1} v2 = D_{x0} v3, with v1 eliminated through the algebraic relation
    grid = {v1: (x0, x0), v2: (x0, x1), v3: (x1, x1)}
    others = [w for w in (v1, v2, v3) if w != lead]
    eqs = []
    pairs = [((v1, x1), (v2, x0)), ((v2, x1), (v3, x0))]
    for (a, xa), (b, xb) in pairs:
        da = total_derivative(rhs, xa, new_space) if a == lead else jet(a.name, xa)
        db = total_derivative(rhs, xb, new_space) if b == lead else jet(b.name, xb)
        res = canonical(da - db)
        cand = [jet(w.name, x) for w in others for x in (x0, x1) if jet(w.name, x) in res.free_symbols]
        used = {e.lead for e in eqs}
        pick = next(
            (c for c in cand if c not in used and sp.diff(res, c).is_number),
            next((c for c in cand if c not in used), None),
        )
        eqs.append(Equation(res, name="compatibility").solved_for(pick))
    return EquationSystem(tuple(eqs) + (algebraic,), new_space, (eq.name or "") + " corresponding")


def _first_order_linear_parts(residual, space: JetSpace):
    jets = [J for J in space.jet_variables(residual) if jet_index(J)]
    coeffs = {J: canonical(sp.diff(residual, J)) for J in jets}
    rest = canonical(residual.xreplace({J: 0 for J in jets}))
    return coeffs, rest


def is_linear_system(system: EquationSystem) -> bool:
    """Linear in the dependents and their derivatives, coefficients free of the dependents."""
    space = system.space
    deps = set()
    for r in system.residuals:
        for J in space.jet_variables(r):
            deps.add(J)
    for r in system.residuals:
        for J in deps:
            c = sp.diff(r, J)
            if c.free_symbols & deps:
                return False
    return True


def hodograph_transform(system: EquationSystem) -> EquationSystem:
    """Swap the two dependents and the two independents of a homogeneous quasilinear system.

    With ``p, q`` dependent on ``x, y``: ``p_x = y_q/J``, ``p_y = -x_q/J``,
    ``q_x = -y_p/J``, ``q_y = x_p/J`` where ``J = x_p y_q - x_q y_p``. Each
    residual is multiplied by ``J``.
    """
    space = system.space
    if len(space.dependent) != 2 or len(space.independent) != 2 or len(system.equations) != 2:
        raise ReductionError("hodograph transform expects a 2x2 first-order system")
    x, y = space.independent
    p, q = (sp.Symbol(n) for n in space.dependent)
    for r in system.residuals:
        coeffs, rest = _first_order_linear_parts(r, space)
        if rest != 0:
            raise ReductionError(f"system is not homogeneous: {to_text(rest)}")
        for J, c in coeffs.items():
            if len(jet_index(J)) != 1:
                raise ReductionError("system is not first order")
            if space.jet_variables(c) and set(space.jet_variables(c)) - {p, q}:
                raise ReductionError(f"coefficient {to_text(c)} depends on derivatives")
            if c.free_symbols & {x, y}:
                raise ReductionError(f"coefficient {to_text(c)} depends on the independent variables")
    new_space = JetSpace((p, q), (x.name, y.name))
    xp, xq, yp, yq = jet(x.name, p), jet(x.name, q), jet(y.name, p), jet(y.name, q)
    Jac = xp * yq - xq * yp
    if is_zero(Jac):
        raise ReductionError("hodograph Jacobian vanishes")
    rules = {
        jet(p.name, x): yq / Jac,
        jet(p.name, y): -xq / Jac,
        jet(q.name, x): -yp / Jac,
        jet(q.name, y): xp / Jac,
    }
    eqs = []
    for eq in system.equations:
        r = normalize(substitute(eq.residual, rules) * Jac)
        num, den = sp.fraction(r)
        eqs.append(Equation(canonical(sp.expand(num)), name=f"hodograph {eq.name}".strip()))
    return EquationSystem(tuple(eqs), new_space, f"hodograph of {system.name}".strip())
