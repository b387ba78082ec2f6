"""Canonical forms and the symbolic zero test.

``canonical`` is the light pass every core operation returns: sympy's own
evaluation (flattening, sorting, folding, the identity rules) plus real-branch
power rules. ``normalize`` is the heavier pass used to decide whether a
residual vanishes: radicands are factored so products of radicals merge,
then the expression is put over a common denominator with an expanded
numerator.
"""
from __future__ import annotations

import sympy as sp

__all__ = ["canonical", "normalize", "is_zero", "numerator"]

_MAX_ROUNDS = 6


def _is_integer_exponent(ex) -> bool:
    return ex.is_Integer or (ex.is_number and ex.is_integer)


def _canon_exponent(ex):
    if ex.is_number or not ex.free_symbols:
        return ex
    if ex.is_Add or ex.is_Mul or ex.is_Pow:
        return sp.cancel(sp.together(ex))
    return ex


def _split_mul_power(factors, ex):
    """Distribute a non-integer power over a product, keeping the branch real."""
    coeff = sp.Integer(1)
    rest = []
    for f in factors:
        if f.is_number and f.is_real:
            coeff *= f
        else:
            rest.append(f)
    if not rest:
        return None
    if coeff.is_negative:
        adds = [i for i, f in enumerate(rest) if f.is_Add]
        if not adds:
            return None
        # flip the factor that then has a positive constant term: -(k*v - 1)*(k*v + 1)
        # becomes (1 - k*v)*(k*v + 1), real wherever the original radicand is positive
        pick = next((i for i in adds if (-rest[i]).as_coeff_Add()[0] > 0), adds[0])
        rest[pick] = sp.expand(-rest[pick])
        coeff = -coeff
    return sp.Mul(*[sp.Pow(coeff, ex)] + [_pow(f, ex) for f in rest])


def _pow(b, ex):
    ex = _canon_exponent(ex)
    if ex == 0:
        return sp.Integer(1)
    if ex == 1:
        return b
    if b.is_Pow:
        return _pow(b.base, b.exp * ex)
    if isinstance(b, sp.exp) and not _is_integer_exponent(ex):
        return sp.exp(sp.expand(b.args[0] * ex))
    if b.is_Mul and not _is_integer_exponent(ex):
        split = _split_mul_power(b.args, ex)
        if split is not None:
            return split
    return sp.Pow(b, ex)


def _mul(args, pow_rule):
    """Product with same-base powers merged, symbolic exponents included."""
    groups: dict = {}
    for a in args:
        for f in sp.Mul.make_args(a):
            if f.is_Pow:
                b, ex = f.base, f.exp
            else:
                b, ex = f, sp.Integer(1)
            groups.setdefault(b, []).append(ex)
    factors = []
    for b, exps in groups.items():
        if len(exps) == 1:
            factors.append(b if exps[0] == 1 else pow_rule(b, exps[0]))
        else:
            factors.append(pow_rule(b, sp.Add(*exps)))
    return sp.Mul(*factors)


def _rebuild(e, pow_rule):
    if e.is_Atom:
        return e
    args = [_rebuild(a, pow_rule) for a in e.args]
    if e.is_Pow:
        return pow_rule(args[0], args[1])
    if e.is_Mul:
        return _mul(args, pow_rule)
    if e.func is sp.log and args[0].func is sp.exp:
        return args[0].args[0]
    if e.func is sp.exp and args[0].func is sp.log:
        return args[0].args[0]
    if all(a is b for a, b in zip(args, e.args)):
        return e
    return e.func(*args)


def canonical(e):
    """Canonical form: sympy evaluation plus the forced real-branch power rules."""
    e = sp.sympify(e)
    for _ in range(_MAX_ROUNDS):
        new = _rebuild(e, _pow)
        if new == e:
            return new
        e = new
    return e


def _factored_pow(b, ex):
    if ex.is_Rational and not ex.is_Integer and (b.is_Add or b.is_Mul):
        try:
            fb = sp.factor(b)
        except sp.PolynomialError:
            fb = b
        if fb.is_Mul or (fb.is_Pow and fb.exp.is_Integer):
            parts = sp.Mul.make_args(fb)
            split = _split_mul_power(parts, ex)
            if split is not None:
                return canonical(split)
    return _pow(b, ex)


def _expand_args(e):
    """Expand arguments of function applications so equal arguments compare equal."""
    if e.is_Atom:
        return e
    args = [_expand_args(a) for a in e.args]
    if isinstance(e, sp.Function) or isinstance(e, sp.exp):
        args = [sp.expand(a) for a in args]
    if e.is_Pow:
        return sp.Pow(args[0], args[1])
    return e.func(*args)


def numerator(e):
    """Expanded numerator of the common-denominator form of ``e``."""
    n, _ = sp.fraction(sp.together(e))
    return sp.expand(n)


def normalize(e):
    """Heavy normal form used by the symbolic zero test."""
    e = canonical(e)
    for _ in range(_MAX_ROUNDS):
        new = _expand_args(e)
        new = _rebuild(new, _factored_pow)
        new = canonical(new)
        new = sp.cancel(sp.together(new))
        n, d = sp.fraction(new)
        new = canonical(sp.expand(n)) / canonical(sp.expand(d))
        if new == e:
            break
        e = new
    return e


def is_zero(e) -> bool:
    """True when ``e`` normalizes to the literal 0."""
    e = sp.sympify(e)
    if e == 0:
        return True
    n = normalize(e)
    if n == 0:
        return True
    return numerator(n) == 0
