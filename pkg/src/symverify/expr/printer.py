"""Grammar-conformant printing; ``parse(to_text(e)) == e``."""
from __future__ import annotations

import sympy as sp

from .core import OpaqueFunction

__all__ = ["to_text"]

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5

_NAMES = {sp.sin: "sin", sp.cos: "cos", sp.tan: "tan", sp.atan: "atan", sp.exp: "exp", sp.log: "ln"}


def _wrap(pair, min_prec):
    text, prec = pair
    return f"({text})" if prec < min_prec else text


def _number(e):
    if e.is_Integer:
        return (str(e), _ATOM) if e >= 0 else (str(e), _NEG)
    if e.is_Rational:
        text = f"{e.p}/{e.q}"
        return (text, _MUL) if e > 0 else (text, _NEG)
    if e.is_Float:
        v = float(e)
        return (repr(abs(v)), _ATOM) if v >= 0 else (repr(v), _NEG)
    if e is sp.E:
        return "exp(1)", _ATOM
    if e is sp.pi:
        return "4*atan(1)", _MUL
    raise ValueError(f"cannot print non-real constant {e}")


def _is_negative_term(t) -> bool:
    coeff, _ = t.as_coeff_Mul()
    return bool(coeff.is_number and coeff.is_negative)


def _add(e):
    terms = e.as_ordered_terms()
    parts = [_wrap(_p(terms[0]), _ADD)]
    for t in terms[1:]:
        if _is_negative_term(t):
            parts.append(" - " + _wrap(_p(-t), _MUL))
        else:
            parts.append(" + " + _wrap(_p(t), _MUL))
    return "".join(parts), _ADD


def _mul(e):
    coeff, rest = e.as_coeff_mul()
    if coeff.is_negative:
        return "-" + _wrap(_p(-e), _MUL), _NEG
    num, den = [], []
    if coeff != 1:
        if coeff.is_Rational:
            if coeff.p != 1:
                num.append(str(coeff.p))
            if coeff.q != 1:
                den.append(str(coeff.q))
        else:
            num.append(_wrap(_p(coeff), _POW))
    for f in rest:
        if f.is_Pow and f.exp.is_number and f.exp.is_negative:
            den.append(_wrap(_p(sp.Pow(f.base, -f.exp)), _POW))
        else:
            num.append(_wrap(_p(f), _POW))
    text = "*".join(num) if num else "1"
    if den:
        text += "/" + "/".join(den)
    return text, _MUL


def _pow(e):
    b, ex = e.base, e.exp
    if ex == sp.Rational(1, 2):
        return f"sqrt({_p(b)[0]})", _ATOM
    if ex.is_number and ex.is_negative:
        return "1/" + _wrap(_p(sp.Pow(b, -ex)), _POW), _MUL
    return f"{_wrap(_p(b), _ATOM)}^{_wrap(_p(ex), _POW)}", _POW


def _p(e):
    if e.is_Number or e in (sp.E, sp.pi):
        return _number(e)
    if e.is_Symbol:
        return e.name, _ATOM
    if e.is_Add:
        return _add(e)
    if e.is_Mul:
        return _mul(e)
    if e.is_Pow:
        return _pow(e)
    if isinstance(e, OpaqueFunction):
        return f"{type(e).__name__}({', '.join(_p(a)[0] for a in e.args)})", _ATOM
    if e.func in _NAMES:
        return f"{_NAMES[e.func]}({_p(e.args[0])[0]})", _ATOM
    raise ValueError(f"cannot print {e!r} ({type(e).__name__})")


def to_text(e) -> str:
    """Render ``e`` in the expression grammar."""
    return _p(sp.sympify(e))[0]
