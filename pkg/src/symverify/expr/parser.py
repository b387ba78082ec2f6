"""Recursive-descent parser for the expression grammar.

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | pow
    pow   := atom ('^' unary)?
    atom  := NUMBER | IDENT | IDENT "'"* '(' expr (',' expr)* ')'
           | 'diff' '(' IDENT (',' IDENT)+ ')' | '(' expr ')'
"""
from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass

import sympy as sp

from .canonical import canonical
from .core import jet, opaque

__all__ = ["ParseError", "parse", "BUILTINS"]

BUILTINS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "atan": sp.atan,
    "exp": sp.exp,
    "ln": sp.log,
    "sqrt": sp.sqrt,
}

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),'])"
)
_PARTIAL = re.compile(r"^(?P<name>[A-Za-z][A-Za-z0-9]*(?:_(?!d\d)[A-Za-z0-9]+)*)(?P<d>(?:_d\d+)+)$")


class ParseError(ValueError):
    """Syntax or name error with the byte offset where it was detected."""

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, ident, op, eof
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, functions: Mapping[str, int]):
        self.toks = _tokenize(text)
        self.i = 0
        self.functions = dict(functions)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise ParseError(f"unexpected {self._describe()}", self.tok.pos, {repr(text)})
        return self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "eof" else repr(self.tok.text)

    def parse(self):
        e = self.expr()
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self._describe()}", self.tok.pos, {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        # one n-ary product, so a leading sign stays a coefficient instead of
        # being distributed over a parenthesized sum
        negative, first = self.signed()
        factors = [first]
        while self.at("*") or self.at("/"):
            op = self.advance()
            neg, rhs = self.signed()
            negative ^= neg
            if op.text == "*":
                factors.append(rhs)
            else:
                if rhs == 0:
                    raise ParseError("division by zero", op.pos)
                factors.append(rhs**-1)
        if negative:
            factors.insert(0, sp.Integer(-1))
        return factors[0] if len(factors) == 1 else sp.Mul(*factors)

    def signed(self):
        negative = False
        while self.at("-"):
            self.advance()
            negative = not negative
        return negative, self.pow()

    def unary(self):
        negative, e = self.signed()
        return -e if negative else e

    def pow(self):
        start = self.tok.pos
        base = self.atom()
        if self.at("^"):
            self.advance()
            ex = self.unary()
            if base == 0 and (ex.is_number and ex.is_negative):
                raise ParseError("division by zero", start)
            return base**ex
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return sp.Rational(t.text)
        if t.kind == "ident":
            self.advance()
            if t.text == "diff" and self.at("("):
                return self._jet(t)
            if self.at("(") or self.at("'"):
                return self._call(t)
            return sp.Symbol(t.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {self._describe()}", t.pos, {"number", "identifier", "'('", "'-'"})

    def _ident(self) -> _Tok:
        if self.tok.kind != "ident":
            raise ParseError(f"unexpected {self._describe()}", self.tok.pos, {"identifier"})
        return self.advance()

    def _jet(self, head: _Tok):
        self.expect("(")
        base = self._ident().text
        index = []
        self.expect(",")
        index.append(self._ident().text)
        while self.at(","):
            self.advance()
            index.append(self._ident().text)
        self.expect(")")
        return jet(base, *index)

    def _call(self, head: _Tok):
        primes = 0
        while self.at("'"):
            self.advance()
            primes += 1
        self.expect("(")
        args = [self.expr()]
        while self.at(","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        name = head.text
        if name in BUILTINS:
            if primes:
                raise ParseError(f"primes are not allowed on built-in {name}", head.pos)
            if len(args) != 1:
                raise ParseError(f"{name} takes 1 argument, got {len(args)}", head.pos)
            return BUILTINS[name](args[0])
        cls = self._opaque_class(head, primes)
        if len(args) != len(cls.orders):
            raise ParseError(f"{name} takes {len(cls.orders)} argument(s), got {len(args)}", head.pos)
        return cls(*args)

    def _opaque_class(self, head: _Tok, primes: int):
        name = head.text
        if name in self.functions:
            arity = self.functions[name]
            if primes and arity != 1:
                raise ParseError(f"primes need a unary function; {name} has arity {arity}", head.pos)
            return opaque(name, primes) if arity == 1 else opaque(name, arity=arity)
        m = _PARTIAL.match(name)
        if m and m.group("name") in self.functions and self.functions[m.group("name")] > 1 and not primes:
            base = m.group("name")
            orders = [0] * self.functions[base]
            for k in re.findall(r"_d(\d+)", m.group("d")):
                k = int(k)
                if not 1 <= k <= len(orders):
                    raise ParseError(f"{base} has no argument {k}", head.pos)
                orders[k - 1] += 1
            return opaque(base, tuple(orders))
        raise ParseError(f"unknown function {name!r}", head.pos)


def parse(text: str, functions: Mapping[str, int] | None = None):
    """Parse grammar text into a canonical expression.

    ``functions`` declares opaque function names and their arities. Partial
    derivatives of multi-argument functions are written ``F_d1(a, b)``.
    """
    e = _Parser(text, functions or {}).parse()
    if e.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise ParseError("expression is not finite", 0)
    return canonical(e)
