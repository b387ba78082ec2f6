"""Vector fields on jet space, prolongation, and invariance checks."""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import sympy as sp

from .expr import canonical, is_jet, is_zero, jet, jet_base, jet_index, normalize, numerator, raise_index, symbol, to_text
from .jet import Equation, EquationSystem, JetSpace, ShellReductionError, reduce_on_shell, total_derivative
from .sampling import SamplingConfig, SamplingError, sample_max_abs

__all__ = [
    "VectorField",
    "InvarianceReport",
    "prolong",
    "apply_field",
    "lie_bracket",
    "is_contact",
    "check_symmetry",
    "check_conditional_symmetry",
    "check_lie_backlund",
    "check_invariant",
    "invariant_surface_conditions",
    "invariance_condition_of_solution",
    "verdict_for",
    "MAX_PROLONGATION_ORDER",
]

MAX_PROLONGATION_ORDER = 3
CROSS_CHECK_TOLERANCE = 1e-12


class VectorField:
    """A first-order differential operator.

    Coefficient form: ``sum c_b d/db`` over an ordered tuple of variables,
    which may include jet variables (contact and Lie-Backlund fields).
    Evolutionary form: a characteristic ``Q^a`` per dependent base name.
    """

    def __init__(self, coefficients: Mapping | None = None, characteristics: Mapping | None = None, name: str = ""):
        if (coefficients is None) == (characteristics is None):
            raise ValueError("give exactly one of coefficients or characteristics")
        self.name = name
        if coefficients is not None:
            self.form = "coefficient"
            self.coefficients = {symbol(k): canonical(sp.sympify(v)) for k, v in coefficients.items()}
            self.characteristics = None
        else:
            self.form = "evolutionary"
            self.characteristics = {str(k): canonical(sp.sympify(v)) for k, v in characteristics.items()}
            self.coefficients = None

    @classmethod
    def from_text(cls, coefficients: Mapping[str, str], functions=None, name: str = "") -> "VectorField":
        from .expr import parse

        return cls({symbol(k): parse(v, functions) for k, v in coefficients.items()}, name=name)

    @property
    def variables(self) -> tuple:
        if self.coefficients is None:
            return ()
        return tuple(self.coefficients)

    def coefficient(self, var):
        if self.coefficients is None:
            raise ValueError("evolutionary field has no coefficient form")
        return self.coefficients.get(symbol(var), sp.Integer(0))

    def __call__(self, g):
        """Apply as a derivation over the declared variables only."""
        if self.coefficients is None:
            raise ValueError("use apply_field with a jet space for evolutionary fields")
        g = sp.sympify(g)
        return canonical(sum((c * sp.diff(g, v) for v, c in self.coefficients.items()), sp.Integer(0)))

    def _combine(self, other, a, b):
        if self.form != other.form:
            raise ValueError("cannot combine fields of different forms")
        if self.form == "coefficient":
            keys = list(self.coefficients) + [k for k in other.coefficients if k not in self.coefficients]
            return VectorField({k: a * self.coefficient(k) + b * other.coefficient(k) for k in keys})
        keys = list(self.characteristics) + [k for k in other.characteristics if k not in self.characteristics]
        return VectorField(
            characteristics={
                k: a * self.characteristics.get(k, 0) + b * other.characteristics.get(k, 0) for k in keys
            }
        )

    def __add__(self, other):
        return self._combine(other, 1, 1)

    def __sub__(self, other):
        return self._combine(other, 1, -1)

    def __rmul__(self, scalar):
        scalar = sp.sympify(scalar)
        if self.form == "coefficient":
            return VectorField({k: scalar * v for k, v in self.coefficients.items()}, name=self.name)
        return VectorField(characteristics={k: scalar * v for k, v in self.characteristics.items()}, name=self.name)

    def __eq__(self, other):
        if not isinstance(other, VectorField) or self.form != other.form:
            return NotImplemented
        if self.form == "coefficient":
            keys = set(self.coefficients) | set(other.coefficients)
            return all(is_zero(self.coefficient(k) - other.coefficient(k)) for k in keys)
        keys = set(self.characteristics) | set(other.characteristics)
        return all(is_zero(self.characteristics.get(k, 0) - other.characteristics.get(k, 0)) for k in keys)

    __hash__ = None

    def __repr__(self):
        if self.form == "coefficient":
            body = " + ".join(f"({to_text(c)})*d/d{to_text(v)}" for v, c in self.coefficients.items() if c != 0)
        else:
            body = ", ".join(f"Q[{k}] = {to_text(q)}" for k, q in self.characteristics.items())
        return f"VectorField({body or '0'})"


def _multi_indices(independent, order):
    for k in range(order + 1):
        yield from itertools.combinations_with_replacement(independent, k)


def _characteristic_of(vf: VectorField, base: str, space: JetSpace):
    if vf.form == "evolutionary":
        return vf.characteristics.get(base, sp.Integer(0))
    q = vf.coefficient(sp.Symbol(base))
    for x in space.independent:
        q = q - vf.coefficient(x) * jet(base, x)
    return canonical(q)


def prolong(vf: VectorField, order: int, space: JetSpace) -> VectorField:
    """Prolongation to jets of the given order, in coefficient form.

    Coefficient fields use the recursion
    ``eta_{J,i} = D_i eta_J - sum_j D_i(xi^j) u_{J,j}``. Evolutionary fields
    give ``D_J Q`` on every ``u_J``. Declared coefficients of jet variables
    are replaced by the computed ones (see ``is_contact`` to compare them).
    """
    if order > MAX_PROLONGATION_ORDER:
        raise ValueError(f"prolongation beyond order {MAX_PROLONGATION_ORDER} is not supported")
    coeffs: dict = {}
    if vf.form == "evolutionary":
        for base in space.dependent:
            q = vf.characteristics.get(base, sp.Integer(0))
            values = {(): q}
            for J in _multi_indices(space.independent, order):
                if J:
                    values[J] = total_derivative(values[J[:-1]], J[-1], space)
                coeffs[jet(base, *J)] = values[J]
        return VectorField(coeffs, name=vf.name)
    for x in space.independent:
        coeffs[x] = vf.coefficient(x)
    xi = {x: vf.coefficient(x) for x in space.independent}
    for base in space.dependent:
        values = {(): vf.coefficient(sp.Symbol(base))}
        coeffs[sp.Symbol(base)] = values[()]
        for J in _multi_indices(space.independent, order):
            if not J:
                continue
            prev, i = J[:-1], J[-1]
            eta = total_derivative(values[prev], i, space)
            for xj in space.independent:
                dxi = total_derivative(xi[xj], i, space)
                if dxi != 0:
                    eta = eta - dxi * jet(base, *(prev + (xj,)))
            values[J] = canonical(eta)
            coeffs[jet(base, *J)] = values[J]
    return VectorField(coeffs, name=vf.name)


def is_contact(vf: VectorField, space: JetSpace) -> bool:
    """True if every declared jet coefficient matches the prolongation formula."""
    if vf.form != "coefficient":
        return True
    declared = [v for v in vf.variables if is_jet(v) and jet_index(v)]
    if not declared:
        return True
    order = max(len(jet_index(v)) for v in declared)
    pr = prolong(vf, order, space)
    return all(is_zero(vf.coefficient(v) - pr.coefficient(v)) for v in declared)


def apply_field(vf: VectorField, g, space: JetSpace | None = None):
    """``pr X (g)``; prolongs only when ``g`` involves jets the field does not cover."""
    g = sp.sympify(g)
    if space is None:
        return vf(g)
    needed = space.jet_variables(g)
    if vf.form == "coefficient" and all(v in vf.coefficients for v in needed):
        return vf(g)
    order = space.order(g)
    return prolong(vf, order, space)(g)


def lie_bracket(v1: VectorField, v2: VectorField) -> VectorField:
    """``[v1, v2]`` for coefficient fields over the same set of variables."""
    if v1.form != "coefficient" or v2.form != "coefficient":
        raise ValueError("bracket is defined here for coefficient fields")
    if set(v1.variables) != set(v2.variables):
        missing = set(v1.variables) ^ set(v2.variables)
        raise ValueError(f"fields act on different variables: {sorted(to_text(m) for m in missing)}")
    out = {}
    for a in v1.variables:
        out[a] = canonical(v1(v2.coefficient(a)) - v2(v1.coefficient(a)))
    return VectorField(out)


@dataclass
class InvarianceReport:
    verdict: str
    residuals: tuple
    max_abs: float | None = None
    samples: int = 0
    seed: int | None = None
    details: str = ""
    raw: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict in ("symbolic-zero", "numeric-zero")

    @property
    def residual(self):
        return self.residuals[0] if len(self.residuals) == 1 else sp.Tuple(*self.residuals)

    def describe(self) -> str:
        res = "; ".join(to_text(r) for r in self.residuals)
        extra = f", max |r| = {self.max_abs:.3g} over {self.samples} samples" if self.max_abs is not None else ""
        tail = f" ({self.details})" if self.details else ""
        return f"{self.verdict}{extra}: {res}{tail}"


def verdict_for(raw: Sequence, config: SamplingConfig | None = None, cross_check: bool = True) -> InvarianceReport:
    """Classify residual expressions as symbolic-zero, numeric-zero or nonzero.

    A symbolic zero is confirmed by sampling the unnormalized residuals; a
    mismatch there (which points at a branch choice in simplification) is
    reported as nonzero.
    """
    config = config or SamplingConfig()
    raw = tuple(canonical(sp.sympify(r)) for r in raw)
    normal = tuple(normalize(r) for r in raw)
    if all(r == 0 for r in normal):
        if not cross_check or config.cross_check == 0 or all(not r.free_symbols for r in raw):
            return InvarianceReport("symbolic-zero", normal, 0.0, 0, config.seed, raw=raw)
        try:
            worst, used = sample_max_abs(raw, config, count=config.cross_check, relative=True)
        except SamplingError as exc:
            return InvarianceReport("symbolic-zero", normal, None, 0, config.seed, f"cross-check skipped: {exc}", raw)
        if worst < CROSS_CHECK_TOLERANCE:
            return InvarianceReport("symbolic-zero", normal, worst, used, config.seed, raw=raw)
        return InvarianceReport(
            "nonzero", normal, worst, used, config.seed, "symbolic cancellation not confirmed at sample points", raw
        )
    try:
        worst, used = sample_max_abs(raw, config)
    except SamplingError as exc:
        return InvarianceReport("nonzero", normal, None, 0, config.seed, str(exc), raw)
    verdict = "numeric-zero" if worst <= config.tolerance else "nonzero"
    return InvarianceReport(verdict, normal, worst, used, config.seed, raw=raw)


def _invariance_residuals(vf: VectorField, system: EquationSystem, shell: EquationSystem, max_order: int):
    space = system.space
    order = max(system.order, 1)
    if vf.form == "coefficient":
        covered = all(v in vf.coefficients for r in system.residuals for v in space.jet_variables(r))
        field_ = vf if covered else prolong(vf, order, space)
    else:
        field_ = prolong(vf, order, space)
    return [reduce_on_shell(field_(r), shell, max_order=max_order) for r in system.residuals]


def check_symmetry(vf: VectorField, system: EquationSystem, config: SamplingConfig | None = None, max_order: int = 4) -> InvarianceReport:
    """``pr X (Delta) = 0`` on solutions of ``system``."""
    if vf.form == "coefficient" and not is_contact(vf, system.space):
        return InvarianceReport("nonzero", (), details="declared jet coefficients are not those of a contact field")
    try:
        raw = _invariance_residuals(vf, system, system, max_order)
    except ShellReductionError as exc:
        return InvarianceReport("nonzero", (), details=f"on-shell reduction failed: {exc}")
    return verdict_for(raw, config)


def invariant_surface_conditions(vf: VectorField, space: JetSpace, avoid: Iterable = (), system: EquationSystem | None = None) -> list[Equation]:
    """``Q^a = eta^a - xi^i u^a_i = 0`` solved for a first-order derivative.

    With ``system`` the characteristic is first reduced on its solutions, so
    a condition whose natural lead is already a lead of the system is solved
    for another first-order jet. Preference: derivatives along independents
    with constant nonzero ``xi``, then other nonzero ``xi``, then any
    remaining first-order jet of the same base. Conditions that vanish on the
    system are dropped.
    """
    avoid = set(avoid)
    out = []
    for base in space.dependent:
        q = _characteristic_of(vf, base, space)
        if system is not None:
            q = reduce_on_shell(q, system)
        if is_zero(q):
            continue
        ranked = sorted(
            space.independent,
            key=lambda x: (vf.coefficient(x) == 0, not vf.coefficient(x).is_number, space.independent.index(x)),
        )
        present = q.free_symbols
        candidates = [jet(base, x) for x in ranked if jet(base, x) not in avoid and jet(base, x) in present]
        if not candidates:
            raise ValueError(f"no admissible lead for the invariant-surface condition of {base}")
        out.append(Equation(q, name=f"Q[{base}]").solved_for(candidates[0]))
    return out


def check_conditional_symmetry(vf: VectorField, system: EquationSystem, config: SamplingConfig | None = None, max_order: int = 4) -> InvarianceReport:
    """``pr X (Delta) = 0`` on solutions of ``system`` together with ``Q = 0``."""
    if vf.form != "coefficient":
        raise ValueError("conditional symmetry needs a coefficient-form field")
    leads = [eq.lead for eq in system.equations if eq.lead is not None]
    try:
        surface = invariant_surface_conditions(vf, system.space, avoid=leads, system=system)
        shell = system.extended(surface)
        raw = _invariance_residuals(vf, system, shell, max_order)
    except (ShellReductionError, ValueError) as exc:
        return InvarianceReport("nonzero", (), details=str(exc))
    return verdict_for(raw, config)


def check_lie_backlund(characteristic, equation: Equation, space: JetSpace, config: SamplingConfig | None = None, base: str | None = None, max_order: int = 6) -> InvarianceReport:
    """Evolutionary field ``Q d/du`` as a generalized symmetry of a single equation."""
    base = base or space.dependent[0]
    vf = VectorField(characteristics={base: characteristic})
    system = EquationSystem((equation,), space)
    order = max(space.order(equation.residual), 1)
    try:
        applied = prolong(vf, order, space)(equation.residual)
        raw = reduce_on_shell(applied, system, max_order=max_order)
    except (ShellReductionError, ValueError) as exc:
        return InvarianceReport("nonzero", (), details=str(exc))
    return verdict_for([raw], config)


def check_invariant(vf: VectorField, g, space: JetSpace | None = None, config: SamplingConfig | None = None) -> InvarianceReport:
    """``X(g) = 0`` identically."""
    return verdict_for([apply_field(vf, g, space)], config)


def _normalize_condition(c, family: Sequence, nonzero: Iterable):
    c = sp.factor_terms(sp.expand(c))
    _, c = c.as_content_primitive()
    nonzero = {symbol(n) for n in nonzero}
    last = next((p for p in reversed(family) if sp.expand(c).has(p)), None)
    if last is not None:
        lead = sp.expand(c).coeff(last)
        if lead != 0:
            coeff, factors = sp.factor_list(lead)
            for f, k in factors:
                if f in nonzero or (f.free_symbols and f.free_symbols <= nonzero and f.is_Pow):
                    c = c / f**k
            if sp.expand(c).coeff(last).could_extract_minus_sign():
                c = -c
    elif sp.expand(c).could_extract_minus_sign():
        c = -c
    return canonical(sp.expand(c))


def invariance_condition_of_solution(vf: VectorField, solution: Mapping, space: JetSpace, family: Sequence = (), nonzero: Iterable = ()) -> list:
    """Conditions on the family parameters for the graph ``u = sol`` to be invariant.

    ``X(u^a - sol^a)`` restricted to the graph must vanish for every value of
    the independent variables; each independent coefficient of the resulting
    numerator is one condition. An empty list means the solution is invariant
    for all parameter values. Conditions are made primitive and divided by
    the factors of the last parameter's coefficient that are declared
    nonzero.
    """
    family = [symbol(p) for p in family]
    graph = {sp.Symbol(k) if isinstance(k, str) else k: canonical(sp.sympify(v)) for k, v in solution.items()}
    total = []
    for u, s in graph.items():
        applied = vf(u - s)
        total.append(canonical(applied.xreplace(graph)))
    conditions = []
    for t in total:
        num = numerator(normalize(t))
        if num == 0:
            continue
        try:
            coeffs = sp.Poly(num, *space.independent).coeffs()
        except sp.PolynomialError:
            coeffs = [num]
        for c in coeffs:
            c = _normalize_condition(c, family, nonzero)
            if c == 0:
                continue
            if any(not sp.cancel(c / d).free_symbols for d in conditions):
                continue
            conditions.append(c)
    return conditions
