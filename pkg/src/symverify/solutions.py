"""Numeric verification of particular solutions: Backlund pairs and quadrature families."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .expr import canonical, differentiate, evaluate, is_zero, opaque, parse, symbol, to_text
from .jet import Equation
from .numerics import CumulativeIntegral, Grid, NumericsError, fd_derivatives, fd_residual, integrate_ode
from .sampling import ExprSampler

__all__ = [
    "DomainGuardError",
    "BacklundReport",
    "backlund_verify",
    "QuadratureSolution",
    "verify_solution_33d",
    "phi2_quadrature_identity",
    "closed_form_phi2",
]


class DomainGuardError(NumericsError):
    def __init__(self, message: str, location: dict | None = None):
        self.location = location or {}
        super().__init__(message)


@dataclass
class BacklundReport:
    seed_residual: float
    relation_residual: float
    target_residual: float
    step_halving: float
    min_guard: float
    h: float
    nodes: int

    @property
    def max_residual(self) -> float:
        return max(self.relation_residual, self.target_residual)


def _as_fn(expr, names):
    expr = canonical(sp.sympify(expr))
    return lambda *args: np.asarray(evaluate(expr, dict(zip(names, args))), dtype=float)


def _integrate_pair(w, w1, k, c1, c2, h):
    """u on the lattice: top row along x1, then every column downwards in x2.

    Along x2, ``d(u - w)/dx2 = sin(u - w)/k - w_x2`` repels ``u - w = 0``;
    integrating towards decreasing x2 makes that branch attracting.
    """
    top = c2[-1]
    u0 = float(w(c1[0], top))
    row = integrate_ode(lambda x, y: w1(x, top) + k * np.sin(y), u0, c1[0], c1[-1], h).ys
    if len(row) != len(c1):
        raise NumericsError("row integration does not land on the lattice")
    cols = integrate_ode(lambda x, y: np.sin(y - w(c1, x)) / k, row, top, c2[0], h).ys
    return cols[::-1].T


def backlund_verify(w_expr, k: float, grid: Grid, margin: float = 1e-6, halo: int = 2) -> BacklundReport:
    """Build u from the seed w through the first-order pair and check both equations.

    The pair is ``u_x2 = sin(u - w)/k`` and ``u_x1 = w_x1 + k sin u``. u is
    anchored to w at the corner (min x1, max x2), integrated along the top
    row with the x1 relation and then down every column with the x2 relation
    (RK4, step = grid step). The x1 relation and the target equation
    ``u_x1x2 = sqrt(1 - k^2 u_x2^2) sin u`` are then checked by finite
    differences; the seed equation ``w_x1x2 = sin w`` is checked beforehand
    with exact derivatives of ``w``.
    The square root stays on its real branch only while
    ``cos(u - w) > 0``; leaving it raises ``DomainGuardError``.
    """
    names = grid.names
    if names != ("x1", "x2"):
        raise ValueError("backlund_verify expects axes x1, x2")
    w_expr = canonical(sp.sympify(w_expr))
    w = _as_fn(w_expr, names)
    w1 = _as_fn(differentiate(w_expr, "x1"), names)
    h = grid.h
    c1, c2 = grid.coords(halo)
    X1, X2 = np.meshgrid(c1, c2, indexing="ij")
    W = w(X1, X2) * np.ones_like(X1)
    seed_expr = canonical(differentiate(differentiate(w_expr, "x1"), "x2") - sp.sin(w_expr))
    seed_res = float(np.max(np.abs(_as_fn(seed_expr, names)(X1, X2) * np.ones_like(X1))))

    U = _integrate_pair(w, w1, k, c1, c2, h)
    guard = np.cos(U - W)
    if not np.all(np.isfinite(U)) or guard.min() <= margin:
        i, j = np.unravel_index(int(np.argmin(np.where(np.isfinite(guard), guard, -np.inf))), guard.shape)
        raise DomainGuardError(
            f"sqrt(1 - k^2*u_x2^2) leaves its real branch (cos(u - w) = {guard[i, j]:.3g}) at "
            f"x1 = {c1[i]:.4g}, x2 = {c2[j]:.4g} for k = {k}",
            {"x1": float(c1[i]), "x2": float(c2[j])},
        )
    core = (slice(halo, -halo), slice(halo, -halo))
    u1 = fd_derivatives(U, ("x1",), names, h, halo)
    u2 = fd_derivatives(U, ("x2",), names, h, halo)
    u12 = fd_derivatives(U, ("x1", "x2"), names, h, halo)
    rel = u1 - w1(X1[core], X2[core]) - k * np.sin(U[core])
    rad = 1 - (k * u2) ** 2
    if rad.min() <= 0:
        raise DomainGuardError("1 - k^2*u_x2^2 is not positive on the grid")
    target = u12 - np.sqrt(rad) * np.sin(U[core])

    # step-halving self-consistency of the integrated field on the shared nodes
    fine = Grid(grid.axes, h / 2)
    f1, f2 = fine.coords(2 * halo)
    Uf = _integrate_pair(w, w1, k, f1, f2, h / 2)
    halving = float(np.max(np.abs(Uf[::2, ::2] - U)))
    return BacklundReport(
        seed_res,
        float(np.max(np.abs(rel))),
        float(np.max(np.abs(target))),
        halving,
        float(guard.min()),
        h,
        int(rel.size),
    )


def _unary(body, var="z"):
    return ExprSampler(parse(body) if isinstance(body, str) else body, (sp.Symbol(var),))


@dataclass
class QuadratureSolution:
    """u(x1, x2) = phi1(x2) + phi2(x2) exp(-alpha^2 x1) with phi2 by nested quadrature.

    ``phi2 = (C1 - I_hH / alpha^2) exp(I_F)`` where ``I_F`` integrates
    ``F(alpha^2 phi1)`` from 0, ``H = exp(-I_F)`` and ``I_hH`` integrates
    ``h(alpha^2 phi1) H`` from 0. Node values of both integrals are memoized.
    """

    F: str
    h: str
    phi1: str
    alpha: float
    C1: float
    step: float = 1e-3
    tol: float = 1e-14
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._F = _unary(self.F)
        self._h = _unary(self.h)
        self._phi1 = _as_fn(parse(self.phi1), ("x2",))
        a2 = self.alpha**2
        self.IF = CumulativeIntegral(lambda s: self._F(0, a2 * float(self._phi1(s))), 0.0, self.step, self.tol)
        self.IH = CumulativeIntegral(
            lambda s: self._h(0, a2 * float(self._phi1(s))) * np.exp(-self.IF(s)), 0.0, self.step, self.tol
        )

    def H(self, x2: float) -> float:
        return float(np.exp(-self.IF(x2)))

    def phi2(self, x2: float) -> float:
        key = float(x2)
        if key not in self._cache:
            self._cache[key] = (self.C1 - self.IH(key) / self.alpha**2) * np.exp(self.IF(key))
        return self._cache[key]

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        flat = np.unique(x2)
        p2 = {v: self.phi2(v) for v in flat}
        P2 = np.vectorize(p2.__getitem__)(x2)
        return self._phi1(x2) + P2 * np.exp(-self.alpha**2 * x1)


def verify_solution_33d(F: str, h: str, phi1: str, alpha: float, C1: float, grid: Grid, richardson: bool = True):
    """FD residual of ``u_x1x2 = u_x1 F(z) + exp(-alpha^2 x1) h(z)``, ``z = u_x1 + alpha^2 u``."""
    fn = {"F": 1, "h": 1}
    eq = Equation.from_text(
        "diff(u,x1,x2) = diff(u,x1)*F(diff(u,x1)+alpha^2*u) + exp(-alpha^2*x1)*h(diff(u,x1)+alpha^2*u)", fn
    )
    functions = {"F": _unary(F), "h": _unary(h)}
    bindings = {"alpha": alpha}

    def evaluator(step):
        sol = QuadratureSolution(F, h, phi1, alpha, C1, step=step)
        return lambda x1, x2: sol(x1, x2)

    rep = fd_residual(eq, evaluator(grid.h), grid, "u", functions, bindings, richardson=False)
    if richardson:
        half = grid.halved()
        rep2 = fd_residual(eq, evaluator(half.h), half, "u", functions, bindings, richardson=False)
        rep.max_residual_half = rep2.max_residual
        rep.ratio = rep.max_residual / rep2.max_residual if rep2.max_residual > 0 else float("inf")
    return rep


def phi2_quadrature_identity():
    """Residual of the quadrature formula for phi2 in its ODE, with the integrals kept opaque.

    ``IF' = F(alpha^2 phi1)``, ``IH' = h(alpha^2 phi1) exp(-IF)``; the
    returned expression must vanish identically.
    """
    fn = {"F": 1, "h": 1, "phi1": 1, "IF": 1, "IH": 1}
    x2 = sp.Symbol("x2")
    phi2 = parse("(C1 - IH(x2)/alpha^2)*exp(IF(x2))", fn)
    d = differentiate(phi2, x2)
    rules = {
        opaque("IF", 1)(x2): parse("F(alpha^2*phi1(x2))", fn),
        opaque("IH", 1)(x2): parse("h(alpha^2*phi1(x2))*exp(-IF(x2))", fn),
    }
    d = canonical(d.xreplace(rules))
    rhs = parse("F(alpha^2*phi1(x2))", fn) * phi2 - parse("h(alpha^2*phi1(x2))/alpha^2", fn)
    return canonical(d - rhs)


def closed_form_phi2(F: str, h: str, phi1: str, alpha: float, C1: float, x2: float, step: float = 1e-3) -> float:
    return QuadratureSolution(F, h, phi1, alpha, C1, step=step).phi2(x2)
