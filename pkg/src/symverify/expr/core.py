"""Symbol kinds used on jet space: jet variables and opaque functions."""
from __future__ import annotations

import functools
import re

import sympy as sp

__all__ = [
    "JetSymbol",
    "OpaqueFunction",
    "jet",
    "opaque",
    "is_jet",
    "jet_base",
    "jet_index",
    "raise_index",
    "opaque_applications",
    "sym",
]

_JET_NAME = re.compile(r"^diff\(([A-Za-z][A-Za-z0-9_]*)((?:,[A-Za-z][A-Za-z0-9_]*)+)\)$")


class JetSymbol(sp.Symbol):
    """Derivative coordinate ``u_{x1 x2 ...}`` treated as an independent symbol.

    The symbol name is the canonical grammar text ``diff(u,x1,x2)`` with the
    multi-index sorted, so ``u_{x2x1}`` and ``u_{x1x2}`` are the same object.
    """

    def __new__(cls, name: str):
        m = _JET_NAME.match(name.replace(" ", ""))
        if m is None:
            raise ValueError(f"not a jet variable name: {name!r}")
        base = m.group(1)
        index = tuple(sorted(m.group(2)[1:].split(",")))
        return super().__new__(cls, f"diff({base},{','.join(index)})")

    @property
    def base(self) -> str:
        return self.name[5:].split(",", 1)[0]

    @property
    def index(self) -> tuple[str, ...]:
        return tuple(self.name[:-1].split(",")[1:])

    @property
    def order(self) -> int:
        return len(self.index)


def jet(base, *index) -> sp.Symbol:
    """Jet variable for ``base`` differentiated along ``index``; order 0 is the base symbol."""
    base = str(base)
    if not index:
        return sp.Symbol(base)
    names = sorted(str(i) for i in index)
    return JetSymbol(f"diff({base},{','.join(names)})")


def sym(name: str) -> sp.Symbol:
    return sp.Symbol(name)


def is_jet(s) -> bool:
    return isinstance(s, JetSymbol)


def jet_base(s: sp.Symbol) -> str:
    return s.base if isinstance(s, JetSymbol) else s.name


def jet_index(s: sp.Symbol) -> tuple[str, ...]:
    return s.index if isinstance(s, JetSymbol) else ()


def raise_index(s: sp.Symbol, x) -> sp.Symbol:
    return jet(jet_base(s), *jet_index(s), str(x))


class OpaqueFunction(sp.Function):
    """Application of a named function we know nothing about except its arity.

    Differentiation only bumps the per-argument derivative counter; it never
    looks inside. Concrete classes come from :func:`opaque`.
    """

    opaque_name: str = ""
    orders: tuple[int, ...] = ()

    @classmethod
    def eval(cls, *args):
        return None

    def fdiff(self, argindex=1):
        orders = list(self.orders)
        orders[argindex - 1] += 1
        return opaque(self.opaque_name, tuple(orders))(*self.args)

    def _eval_is_real(self):
        return None


def _display_name(name: str, orders: tuple[int, ...]) -> str:
    if len(orders) == 1:
        return name + "'" * orders[0]
    return name + "".join(f"_d{i + 1}" * k for i, k in enumerate(orders))


@functools.lru_cache(maxsize=None)
def _opaque_class(name: str, orders: tuple[int, ...]):
    return type(
        _display_name(name, orders),
        (OpaqueFunction,),
        {"opaque_name": name, "orders": orders, "nargs": len(orders)},
    )


def opaque(name: str, orders=0, arity: int | None = None):
    """Return the function class for ``name`` with the given derivative orders.

    ``orders`` is an int for unary functions (prime count) or a tuple holding
    one count per argument. ``arity`` builds the underived class directly.
    """
    if arity is not None:
        orders = (0,) * arity
    elif isinstance(orders, int):
        orders = (orders,)
    orders = tuple(int(k) for k in orders)
    if not orders or any(k < 0 for k in orders):
        raise ValueError(f"bad derivative orders {orders!r} for {name}")
    return _opaque_class(name, orders)


def opaque_applications(e: sp.Basic, name: str | None = None) -> set:
    apps = e.atoms(OpaqueFunction)
    if name is not None:
        apps = {a for a in apps if a.opaque_name == name}
    return apps
