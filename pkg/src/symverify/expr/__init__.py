"""Expression substrate: symbols on jet space, parsing, printing, evaluation."""
from __future__ import annotations

from collections.abc import Iterable

import sympy as sp

from .canonical import canonical, is_zero, normalize, numerator
from .core import (
    JetSymbol,
    OpaqueFunction,
    is_jet,
    jet,
    jet_base,
    jet_index,
    opaque,
    opaque_applications,
    raise_index,
    sym,
)
from .evaluate import DomainError, EvaluationError, UnboundSymbolError, denominators, evaluate
from .parser import BUILTINS, ParseError, parse
from .printer import to_text

__all__ = [
    "JetSymbol",
    "OpaqueFunction",
    "ParseError",
    "EvaluationError",
    "DomainError",
    "UnboundSymbolError",
    "BUILTINS",
    "canonical",
    "normalize",
    "is_zero",
    "numerator",
    "jet",
    "jet_base",
    "jet_index",
    "is_jet",
    "raise_index",
    "opaque",
    "opaque_applications",
    "sym",
    "symbol",
    "parse",
    "to_text",
    "evaluate",
    "denominators",
    "differentiate",
    "substitute",
    "substitute_function",
]


def symbol(name) -> sp.Symbol:
    """Symbol from its grammar name; ``diff(u,x1)`` gives a jet variable."""
    if isinstance(name, sp.Symbol):
        return name
    name = str(name).replace(" ", "")
    if name.startswith("diff("):
        return JetSymbol(name)
    return sp.Symbol(name)


def differentiate(e, v):
    """Partial derivative; jet variables are independent coordinates."""
    return canonical(sp.diff(sp.sympify(e), symbol(v)))


def substitute(e, rules):
    """Simultaneous replacement of whole symbols or opaque applications.

    ``rules`` is a mapping or an iterable of ``(pattern, replacement)`` pairs.
    """
    items = rules.items() if hasattr(rules, "items") else rules
    mapping = {}
    for pat, rep in items:
        pat = symbol(pat) if isinstance(pat, str) else sp.sympify(pat)
        mapping[pat] = sp.sympify(rep)
    if not mapping:
        return sp.sympify(e)
    return canonical(sp.sympify(e).xreplace(mapping))


def substitute_function(e, name: str, params: Iterable, body):
    """Replace every application of opaque ``name`` (any derivative order).

    ``body`` is an expression in ``params``; a derivative application
    ``name^(k)(args)`` becomes the matching derivative of ``body`` at ``args``.
    """
    params = tuple(symbol(p) for p in params)
    body = sp.sympify(body)
    e = sp.sympify(e)
    apps = sorted(opaque_applications(e, name), key=sp.default_sort_key)
    if not apps:
        return e
    mapping = {}
    for app in apps:
        if len(app.args) != len(params):
            raise ValueError(f"{name} applied to {len(app.args)} args, body takes {len(params)}")
        d = body
        for p, k in zip(params, app.orders):
            if k:
                d = sp.diff(d, p, k)
        mapping[app] = d.xreplace(dict(zip(params, app.args)))
    return canonical(e.xreplace(mapping))
