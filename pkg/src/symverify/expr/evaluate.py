"""Real-branch numeric evaluation of expressions (scalars or numpy arrays)."""
from __future__ import annotations

from collections.abc import Callable, Mapping

import numpy as np
import sympy as sp

from .core import OpaqueFunction

__all__ = ["EvaluationError", "UnboundSymbolError", "DomainError", "evaluate", "denominators"]


class EvaluationError(ValueError):
    pass


class UnboundSymbolError(EvaluationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound symbol {name}")


class DomainError(EvaluationError):
    """Raised with the offending subterm when a value leaves the real domain."""

    def __init__(self, reason: str, subterm):
        from .printer import to_text

        self.reason = reason
        try:
            self.subterm = to_text(subterm)
        except ValueError:
            self.subterm = str(subterm)
        super().__init__(f"{reason} in {self.subterm}")


def _unary(fn, guard=None):
    return fn, guard


def _log_guard(x):
    return np.any(x <= 0)


def _tan_guard(x):
    return np.any(np.abs(np.cos(x)) < 1e-300)


_FUNCS = {
    sp.sin: (np.sin, None, ""),
    sp.cos: (np.cos, None, ""),
    sp.tan: (np.tan, _tan_guard, "tan at a pole"),
    sp.atan: (np.arctan, None, ""),
    sp.exp: (np.exp, None, ""),
    sp.log: (np.log, _log_guard, "ln of a non-positive value"),
}


def _is_integral(x) -> bool:
    return bool(np.all(np.asarray(x) == np.round(np.asarray(x))))


class _Evaluator:
    def __init__(self, bindings, functions):
        self.values = {}
        for k, v in bindings.items():
            name = k.name if isinstance(k, sp.Symbol) else str(k).replace(" ", "")
            self.values[name] = np.asarray(v, dtype=float) if not np.isscalar(v) else float(v)
        self.functions = functions or {}

    def __call__(self, e):
        if e.is_Number or e in (sp.E, sp.pi):
            if not e.is_real:
                raise DomainError("non-real constant", e)
            return float(e)
        if e.is_Symbol:
            try:
                return self.values[e.name]
            except KeyError:
                raise UnboundSymbolError(e.name) from None
        if e.is_Add:
            total = 0.0
            for a in e.args:
                total = total + self(a)
            return total
        if e.is_Mul:
            prod = 1.0
            for a in e.args:
                prod = prod * self(a)
            return prod
        if e.is_Pow:
            return self._pow(e)
        if isinstance(e, OpaqueFunction):
            return self._opaque(e)
        if e.func in _FUNCS:
            fn, guard, reason = _FUNCS[e.func]
            x = self(e.args[0])
            if guard is not None and guard(x):
                raise DomainError(reason, e)
            return fn(x)
        raise EvaluationError(f"cannot evaluate {type(e).__name__}")

    def _pow(self, e):
        b = self(e.base)
        ex = e.exp
        if ex.is_Integer:
            n = int(ex)
            if n < 0 and np.any(b == 0):
                raise DomainError("division by zero", e)
            if n < 0:
                return 1.0 / (np.asarray(b, dtype=float) ** (-n)) if not np.isscalar(b) else 1.0 / (b ** (-n))
            return b**n
        x = self(ex)
        if np.any(b < 0) and not _is_integral(np.where(np.asarray(b) < 0, x, 0.0)):
            raise DomainError("fractional power of negative base", e)
        if np.any((b == 0) & (np.asarray(x) < 0)):
            raise DomainError("division by zero", e)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(b, x) if not (np.isscalar(b) and np.isscalar(x)) else float(b) ** float(x)

    def _opaque(self, e):
        name = e.opaque_name
        if name not in self.functions:
            raise UnboundSymbolError(f"{name}()")
        order = e.orders[0] if len(e.orders) == 1 else e.orders
        return self.functions[name](order, *[self(a) for a in e.args])


def evaluate(e, bindings: Mapping, functions: Mapping[str, Callable] | None = None):
    """Evaluate ``e`` in double precision.

    ``bindings`` maps symbols (or their names, including jet names such as
    ``diff(u,x1)``) to numbers or arrays. ``functions`` maps opaque function
    names to samplers called as ``sampler(order, *args)`` where ``order`` is
    the prime count (unary) or the per-argument order tuple.
    """
    with np.errstate(all="ignore"):
        return _Evaluator(bindings, functions)(sp.sympify(e))


def denominators(e) -> list:
    """Bases raised to negative powers, i.e. the expressions that must not vanish."""
    out = []
    for p in sp.sympify(e).atoms(sp.Pow):
        if p.exp.is_number and p.exp.is_negative:
            out.append(p.base)
    return out
