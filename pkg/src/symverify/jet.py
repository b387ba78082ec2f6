"""Total derivatives, on-shell reduction and implicit differentiation on jet space."""
from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import sympy as sp

from .expr import (
    JetSymbol,
    canonical,
    is_zero,
    jet,
    jet_base,
    jet_index,
    normalize,
    parse,
    raise_index,
    substitute,
    symbol,
    to_text,
)

__all__ = [
    "JetSpace",
    "Equation",
    "EquationSystem",
    "ShellReductionError",
    "ImplicitSystemError",
    "total_derivative",
    "reduce_on_shell",
    "implicit_derivative",
    "implicit_derivatives",
    "descends",
    "DEFAULT_MAX_ORDER",
]

DEFAULT_MAX_ORDER = 4
DEFAULT_STEP_BUDGET = 200


class ShellReductionError(RuntimeError):
    pass


class ImplicitSystemError(ValueError):
    def __init__(self, message: str, determinant=None):
        self.determinant = determinant
        super().__init__(message)


@dataclass(frozen=True)
class JetSpace:
    """Independent variables and the base names of dependent variables.

    ``auxiliary`` names behave like dependent variables under total
    differentiation (invariants such as omega) but are never eliminated.
    """

    independent: tuple[sp.Symbol, ...]
    dependent: tuple[str, ...]
    auxiliary: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "independent", tuple(symbol(x) for x in self.independent))
        object.__setattr__(self, "dependent", tuple(str(u) for u in self.dependent))
        object.__setattr__(self, "auxiliary", tuple(str(u) for u in self.auxiliary))

    @property
    def bases(self) -> tuple[str, ...]:
        return self.dependent + self.auxiliary

    def is_jet_variable(self, s) -> bool:
        if not isinstance(s, sp.Symbol):
            return False
        if isinstance(s, JetSymbol):
            return s.base in self.bases and all(sp.Symbol(i) in self.independent for i in s.index)
        return s.name in self.bases

    def jet_variables(self, e) -> list[sp.Symbol]:
        return sorted((s for s in sp.sympify(e).free_symbols if self.is_jet_variable(s)), key=sp.default_sort_key)

    def order(self, e) -> int:
        return max((len(jet_index(s)) for s in self.jet_variables(e)), default=0)

    def with_auxiliary(self, names: Iterable[str]) -> "JetSpace":
        extra = tuple(n for n in names if n not in self.auxiliary)
        return JetSpace(self.independent, self.dependent, self.auxiliary + extra)


def total_derivative(e, x, space: JetSpace):
    """D_x e = de/dx + sum over jet variables J of (de/dJ) * J_x."""
    e = sp.sympify(e)
    x = symbol(x)
    result = sp.diff(e, x)
    for J in space.jet_variables(e):
        dJ = sp.diff(e, J)
        if dJ != 0:
            result += dJ * raise_index(J, x)
    return canonical(result)


def descends(J, lead) -> bool:
    """True if ``J`` is ``lead`` or one of its derivatives."""
    if jet_base(J) != jet_base(lead):
        return False
    return not (Counter(jet_index(lead)) - Counter(jet_index(J)))


@dataclass(frozen=True)
class Equation:
    """An equation ``residual = 0``, optionally solved for a lead jet variable."""

    residual: sp.Expr
    lead: sp.Symbol | None = None
    replacement: sp.Expr | None = None
    name: str = ""

    def __post_init__(self):
        if self.lead is not None:
            if self.replacement is None:
                raise ValueError("lead given without replacement")
            if self.lead in self.replacement.free_symbols:
                raise ValueError(f"lead {self.lead} occurs in its own replacement")

    @classmethod
    def from_text(cls, text: str, functions=None, lead=None, name: str = "") -> "Equation":
        """Build from ``"lhs = rhs"`` (or a bare residual) in the grammar."""
        if "=" in text:
            lhs, rhs = text.split("=", 1)
            residual = canonical(parse(lhs, functions) - parse(rhs, functions))
        else:
            residual = parse(text, functions)
        eq = cls(residual, name=name)
        if lead is not None:
            return eq.solved_for(lead)
        return eq

    def solved_for(self, lead) -> "Equation":
        lead = symbol(lead)
        a = sp.diff(self.residual, lead)
        if a == 0:
            raise ValueError(f"residual does not contain {to_text(lead)}")
        if lead in a.free_symbols:
            # unique explicit root, e.g. ln(u_t) - g = 0 gives u_t = exp(g)
            roots = sp.solve(self.residual, lead, dict=False)
            if len(roots) != 1:
                raise ValueError(f"residual is not uniquely solvable for {to_text(lead)}")
            replacement = canonical(roots[0])
        else:
            rest = self.residual.xreplace({lead: 0})
            replacement = canonical(sp.cancel(-rest / a)) if a != 1 else canonical(-rest)
        eq = Equation(self.residual, lead, replacement, self.name)
        if not eq.check_solved_form():
            raise ValueError(f"solved form for {to_text(lead)} does not satisfy the residual")
        return eq

    def check_solved_form(self) -> bool:
        if self.lead is None:
            return True
        return is_zero(substitute(self.residual, {self.lead: self.replacement}))

    def __str__(self):
        return f"{to_text(self.residual)} = 0"


@dataclass(frozen=True)
class EquationSystem:
    equations: tuple[Equation, ...]
    space: JetSpace
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(self.equations))
        leads = [eq.lead for eq in self.equations if eq.lead is not None]
        if len(set(leads)) != len(leads):
            raise ValueError("lead variables of a system must be distinct")

    @property
    def residuals(self) -> list:
        return [eq.residual for eq in self.equations]

    @property
    def order(self) -> int:
        return max((self.space.order(r) for r in self.residuals), default=0)

    def extended(self, equations: Sequence[Equation]) -> "EquationSystem":
        return EquationSystem(self.equations + tuple(equations), self.space, self.name)


def reduce_on_shell(e, system: EquationSystem, max_order: int = DEFAULT_MAX_ORDER, step_budget: int = DEFAULT_STEP_BUDGET):
    """Eliminate every lead variable and its derivatives from ``e``.

    Differential consequences of the solved forms are produced lazily, only
    for the jet variables that actually occur.
    """
    space = system.space
    solved = [(eq.lead, eq.replacement) for eq in system.equations if eq.lead is not None]
    cache: dict = {}

    def consequence(J):
        if J in cache:
            return cache[J]
        for lead, rep in solved:
            if descends(J, lead):
                extra = sorted((Counter(jet_index(J)) - Counter(jet_index(lead))).elements())
                if len(extra) > max_order:
                    raise ShellReductionError(f"consequence of order {len(extra)} needed for {to_text(J)}")
                value = rep
                current = lead
                for x in extra:
                    current = raise_index(current, x)
                    value = total_derivative(value, x, space)
                cache[J] = value
                return value
        cache[J] = None
        return None

    e = canonical(e)
    for _ in range(step_budget):
        rules = {}
        for J in space.jet_variables(e):
            value = consequence(J)
            if value is not None:
                rules[J] = value
        if not rules:
            return e
        e = substitute(e, rules)
    raise ShellReductionError(f"on-shell reduction exceeded {step_budget} rewriting steps")


def _linear_solve(rows, unknowns):
    A = sp.Matrix([[sp.diff(r, v) for v in unknowns] for r in rows])
    for entry in A:
        if entry.free_symbols & set(unknowns):
            raise ImplicitSystemError("relations are not linear in the unknown derivatives")
    b = sp.Matrix([-r.xreplace({v: 0 for v in unknowns}) for r in rows])
    det = A.det(method="berkowitz")
    if is_zero(det):
        raise ImplicitSystemError(f"singular implicit system, determinant {to_text(canonical(det))}", det)
    sol = A.adjugate() * b / det
    return {v: sol[i] for i, v in enumerate(unknowns)}


def implicit_derivatives(relations: Sequence[Equation], wrt, space: JetSpace, unknowns=None) -> dict:
    """Differentiate every relation along ``wrt`` and solve for the new jets.

    Returns a mapping from each newly introduced jet variable to its value.
    Solved-form relations on non-auxiliary leads are substituted back, so the
    result is expressed through independents, invariants and the ansatz
    functions.
    """
    wrt = symbol(wrt)
    residuals = [canonical(r.residual) for r in relations]
    present = set()
    for r in residuals:
        present |= set(space.jet_variables(r))
    derived = [total_derivative(r, wrt, space) for r in residuals]
    if unknowns is None:
        new = set()
        for d in derived:
            new |= set(space.jet_variables(d))
        unknowns = sorted(new - present, key=sp.default_sort_key)
    unknowns = [symbol(u) for u in unknowns]
    if len(unknowns) != len(derived):
        raise ImplicitSystemError(
            f"implicit system is not square: {len(derived)} relations, unknowns "
            f"{[to_text(u) for u in unknowns]}"
        )
    values = _linear_solve(derived, unknowns)
    explicit = {
        r.lead: r.replacement
        for r in relations
        if r.lead is not None and jet_base(r.lead) not in space.auxiliary
    }
    out = {}
    for v, val in values.items():
        for _ in range(4):
            new_val = val.xreplace(explicit)
            if new_val == val:
                break
            val = new_val
        out[v] = canonical(sp.cancel(sp.together(canonical(val))))
    return out


def implicit_derivative(relations: Sequence[Equation], target, wrt, space: JetSpace, unknowns=None):
    """Value of ``target`` obtained by implicit total differentiation along ``wrt``."""
    target = symbol(target)
    values = implicit_derivatives(relations, wrt, space, unknowns)
    if target not in values:
        raise ImplicitSystemError(
            f"{to_text(target)} is not among the derivatives introduced along {wrt}: "
            f"{[to_text(v) for v in values]}"
        )
    return values[target]
