"""Newton iteration, RK4, adaptive Simpson quadrature and finite-difference residuals."""
from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .expr import EvaluationError, canonical, differentiate, evaluate, jet_index, symbol, to_text
from .jet import Equation, JetSpace

__all__ = [
    "NumericsError",
    "NewtonError",
    "QuadratureError",
    "Grid",
    "NewtonResult",
    "newton_solve",
    "Trajectory",
    "integrate_ode",
    "rk4_order",
    "QuadResult",
    "quadrature",
    "CumulativeIntegral",
    "FDReport",
    "lattice",
    "fd_derivatives",
    "fd_residual",
    "ImplicitSolution",
]


class NumericsError(RuntimeError):
    pass


class NewtonError(NumericsError):
    pass


class QuadratureError(NumericsError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid over named axes.

    ``exclusions`` are predicates ``f(points) -> bool array`` that are True
    where a node is too close to a singular locus; such nodes are dropped
    from residual statistics.
    """

    axes: tuple[tuple[str, float, float], ...]
    h: float
    exclusions: tuple[Callable, ...] = ()

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid step must be positive")
        object.__setattr__(self, "axes", tuple((str(n), float(a), float(b)) for n, a, b in self.axes))
        for n, a, b in self.axes:
            if not b > a:
                raise ValueError(f"empty range for axis {n}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _, _ in self.axes)

    def coords(self, halo: int = 0) -> list[np.ndarray]:
        out = []
        for _, a, b in self.axes:
            n = int(round((b - a) / self.h))
            out.append(a + self.h * np.arange(-halo, n + 1 + halo))
        return out

    def mesh(self, halo: int = 0) -> dict[str, np.ndarray]:
        arrays = np.meshgrid(*self.coords(halo), indexing="ij")
        return dict(zip(self.names, arrays))

    def halved(self) -> "Grid":
        return Grid(self.axes, self.h / 2, self.exclusions)

    def mask(self, points: Mapping[str, np.ndarray]) -> np.ndarray:
        shape = next(iter(points.values())).shape
        keep = np.ones(shape, dtype=bool)
        for pred in self.exclusions:
            keep &= ~np.asarray(pred(points), dtype=bool)
        return keep


@dataclass
class NewtonResult:
    root: float | np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def newton_solve(
    f: Callable,
    x0,
    tol: float = 1e-12,
    max_iter: int = 50,
    df: Callable | None = None,
    polish: int = 2,
    step: float = 1e-6,
) -> NewtonResult:
    """Newton iteration, elementwise on arrays.

    Stops when every ``|f| < tol``, then takes ``polish`` extra steps so the
    root is accurate to rounding (finite differences of implicit solutions
    amplify any remaining error). ``df`` defaults to a central difference.
    """
    x = np.array(x0, dtype=float, copy=True)
    scalar = x.ndim == 0

    def deriv(z):
        if df is not None:
            return np.asarray(df(z), dtype=float)
        return (np.asarray(f(z + step)) - np.asarray(f(z - step))) / (2 * step)

    history = []
    extra = 0
    for it in range(1, max_iter + 1):
        try:
            fx = np.asarray(f(x), dtype=float)
        except EvaluationError as exc:
            raise NewtonError(f"iterate left the domain at iteration {it}: {exc}") from exc
        if not np.all(np.isfinite(fx)):
            raise NewtonError(f"non-finite residual at iteration {it}")
        history.append(float(np.max(np.abs(fx))))
        if history[-1] < tol:
            if extra >= polish:
                r = x.item() if scalar else x
                return NewtonResult(r, it - 1, history[-1], history)
            extra += 1
        try:
            d = deriv(x)
        except EvaluationError as exc:
            raise NewtonError(f"derivative undefined at iteration {it}: {exc}") from exc
        if np.any(np.abs(d) < 1e-300) or not np.all(np.isfinite(d)):
            raise NewtonError(f"derivative vanishes at iterate {x if scalar else 'array'}")
        x = x - fx / d
    fx = np.asarray(f(x), dtype=float)
    res = float(np.max(np.abs(fx)))
    if res < tol:
        return NewtonResult(x.item() if scalar else x, max_iter, res, history)
    raise NewtonError(f"no convergence in {max_iter} iterations (|f| = {res:.3g})")


@dataclass
class Trajectory:
    xs: np.ndarray
    ys: np.ndarray

    def at_end(self):
        return self.ys[-1]


def _rhs_from_equations(equations: Sequence[Equation], x, unknowns, functions=None, bindings=None):
    x = symbol(x)
    exprs = [canonical(eq.replacement) for eq in equations]
    names = [symbol(u).name for u in unknowns]
    bindings = dict(bindings or {})

    def rhs(t, y):
        env = dict(bindings)
        env[x.name] = t
        for n, v in zip(names, np.atleast_1d(y) if np.ndim(y) <= 1 else y):
            env[n] = v
        return np.array([evaluate(e, env, functions) for e in exprs])

    return rhs


def integrate_ode(rhs, y0, x0: float, x1: float, h: float = 1e-3, unknowns=None, functions=None, bindings=None) -> Trajectory:
    """Classical fixed-step RK4 for ``y' = g(x, y)``; ``x1 < x0`` integrates backwards.

    ``rhs`` is a callable or a list of solved-form Equations (leads are the
    derivatives, ``unknowns`` the dependent names). ``y0`` may be an array;
    lines of independent problems are integrated together.
    """
    if not callable(rhs):
        rhs = _rhs_from_equations(rhs, sp.Symbol("x") if unknowns is None else _ode_variable(rhs), unknowns, functions, bindings)
    n = int(round(abs(x1 - x0) / h))
    if n <= 0:
        raise ValueError("integration interval is empty")
    h = (x1 - x0) / n
    y = np.array(y0, dtype=float, copy=True)
    xs = x0 + h * np.arange(n + 1)
    ys = np.empty((n + 1,) + y.shape)
    ys[0] = y
    with np.errstate(all="raise"):
        try:
            for i in range(n):
                x = xs[i]
                k1 = np.asarray(rhs(x, y))
                k2 = np.asarray(rhs(x + h / 2, y + h / 2 * k1))
                k3 = np.asarray(rhs(x + h / 2, y + h / 2 * k2))
                k4 = np.asarray(rhs(x + h, y + h * k3))
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                ys[i + 1] = y
        except (FloatingPointError, EvaluationError) as exc:
            raise NumericsError(f"evaluation failed near x = {xs[i]:.6g}: {exc}") from exc
    return Trajectory(xs, ys)


def _ode_variable(equations):
    idx = jet_index(equations[0].lead)
    return sp.Symbol(idx[0])


def rk4_order(rhs, y0, x0, x1, exact, hs=(1e-1, 5e-2, 2.5e-2)) -> float:
    """Observed convergence order from successive halvings against an exact end value."""
    errs = [abs(float(np.ravel(integrate_ode(rhs, y0, x0, x1, h).at_end())[0]) - exact) for h in hs]
    orders = [np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]) for i in range(len(errs) - 1)]
    return float(np.mean(orders))


@dataclass
class QuadResult:
    value: float
    error: float
    evaluations: int


def quadrature(f: Callable, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> QuadResult:
    """Adaptive Simpson with the Richardson correction; ``error`` bounds the true error."""
    count = [0]

    def F(x):
        count[0] += 1
        return float(f(x))

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    fa, fb, fm = F(a), F(b), F((a + b) / 2)
    whole = simpson(fa, fm, fb, a, b)
    total, err = 0.0, 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a_, b_, fa_, fm_, fb_, whole_, tol_, depth = stack.pop()
        m = (a_ + b_) / 2
        lm, rm = (a_ + m) / 2, (m + b_) / 2
        flm, frm = F(lm), F(rm)
        left = simpson(fa_, flm, fm_, a_, m)
        right = simpson(fm_, frm, fb_, m, b_)
        delta = left + right - whole_
        if abs(delta) <= 15 * tol_ or (b_ - a_) < 1e-15:
            total += left + right + delta / 15
            err += abs(delta) / 15
            continue
        if depth >= max_depth:
            raise QuadratureError(f"tolerance {tol} not reached on [{a_}, {b_}]")
        stack.append((m, b_, fm_, frm, fb_, right, tol_ / 2, depth + 1))
        stack.append((a_, m, fa_, flm, fm_, left, tol_ / 2, depth + 1))
    return QuadResult(total, err, count[0])


class CumulativeIntegral:
    """``x -> int_a^x f`` with memoized node values on a uniform lattice.

    Values at lattice nodes are accumulated panel by panel; off-lattice
    points add one adaptive Simpson piece from the nearest node below.
    """

    def __init__(self, f: Callable, a: float, step: float, tol: float = 1e-14):
        self.f, self.a, self.step, self.tol = f, float(a), float(step), tol
        self._nodes = [0.0]

    def _node(self, k: int) -> float:
        while len(self._nodes) <= k:
            j = len(self._nodes) - 1
            lo, hi = self.a + j * self.step, self.a + (j + 1) * self.step
            self._nodes.append(self._nodes[-1] + quadrature(self.f, lo, hi, self.tol).value)
        return self._nodes[k]

    def __call__(self, x: float) -> float:
        x = float(x)
        if x < self.a:
            return -quadrature(self.f, x, self.a, self.tol).value
        k = int(np.floor((x - self.a) / self.step + 1e-9))
        base = self._node(k)
        lo = self.a + k * self.step
        if abs(x - lo) < 1e-15:
            return base
        return base + quadrature(self.f, lo, x, self.tol).value


@dataclass
class FDReport:
    max_residual: float
    mean_residual: float
    h: float
    nodes: int
    max_residual_half: float | None = None
    ratio: float | None = None
    location: dict | None = None

    @property
    def richardson_ok(self) -> bool:
        return self.ratio is not None and self.ratio >= 3


def lattice(u_eval: Callable, grid: Grid, halo: int = 2):
    """Values of ``u_eval(**axes)`` on the grid extended by ``halo`` nodes."""
    pts = grid.mesh(halo)
    return pts, np.asarray(u_eval(**pts), dtype=float)


def fd_derivatives(values: np.ndarray, index: tuple, names: Sequence[str], h: float, halo: int = 2) -> np.ndarray:
    """Central-difference derivative of lattice values (halo trimmed).

    First derivatives: 2nd-order central. Pure second derivatives: 5-point
    stencil. Mixed second derivatives: 4-corner stencil.
    """
    nd = values.ndim
    core = tuple(slice(halo, values.shape[i] - halo) for i in range(nd))

    def shifted(offsets):
        sl = []
        for i in range(nd):
            o = offsets.get(i, 0)
            sl.append(slice(halo + o, values.shape[i] - halo + o))
        return values[tuple(sl)]

    axes = [names.index(n) for n in index]
    if len(axes) == 0:
        return values[core]
    if len(axes) == 1:
        i = axes[0]
        return (shifted({i: 1}) - shifted({i: -1})) / (2 * h)
    if len(axes) == 2 and axes[0] == axes[1]:
        i = axes[0]
        return (
            -shifted({i: 2}) + 16 * shifted({i: 1}) - 30 * shifted({}) + 16 * shifted({i: -1}) - shifted({i: -2})
        ) / (12 * h * h)
    if len(axes) == 2:
        i, j = axes
        # nested differences: exact zero when values depend on one axis only
        return (
            (shifted({i: 1, j: 1}) - shifted({i: -1, j: 1})) - (shifted({i: 1, j: -1}) - shifted({i: -1, j: -1}))
        ) / (4 * h * h)
    raise ValueError("finite differences are provided up to second order")


def _fd_once(eq, u_eval, grid, base, functions, bindings):
    halo = 2
    pts, vals = lattice(u_eval, grid, halo)
    names = grid.names
    space = JetSpace(tuple(names), (base,))
    env = dict(bindings or {})
    core = tuple(slice(halo, s - halo) for s in vals.shape)
    for n in names:
        env[n] = pts[n][core]
    residual = eq.residual if isinstance(eq, Equation) else sp.sympify(eq)
    for J in space.jet_variables(residual):
        env[J.name] = fd_derivatives(vals, jet_index(J), names, grid.h, halo)
    r = np.abs(np.broadcast_to(np.asarray(evaluate(residual, env, functions), dtype=float), env[names[0]].shape))
    keep = grid.mask({n: env[n] for n in names})
    if not keep.any():
        raise NumericsError("every grid node is excluded")
    rk = np.where(keep, r, 0.0)
    k = np.unravel_index(int(np.argmax(rk)), rk.shape)
    loc = {n: float(env[n][k]) for n in names}
    return float(rk.max()), float(r[keep].mean()), int(keep.sum()), loc


def fd_residual(
    eq,
    u_eval: Callable,
    grid: Grid,
    base: str = "u",
    functions=None,
    bindings=None,
    richardson: bool = True,
) -> FDReport:
    """Max and mean |residual| of ``eq`` with derivatives of ``u`` by finite differences.

    ``u_eval`` is called with one keyword array per axis. With
    ``richardson`` the grid is also evaluated at ``h/2`` and the ratio of
    maxima recorded.
    """
    try:
        mx, mean, n, loc = _fd_once(eq, u_eval, grid, base, functions, bindings)
        rep = FDReport(mx, mean, grid.h, n, location=loc)
        if richardson:
            mx2, _, _, _ = _fd_once(eq, u_eval, grid.halved(), base, functions, bindings)
            rep.max_residual_half = mx2
            rep.ratio = mx / mx2 if mx2 > 0 else float("inf")
    except EvaluationError as exc:
        raise NumericsError(f"evaluator failed inside stencil: {exc}") from exc
    return rep


class ImplicitSolution:
    """A field given through a scalar unknown theta defined implicitly.

    ``relation(theta; axes, params) = 0`` is solved by Newton's method at
    every node, rows in order, each row warm-started from the previous
    row's roots; the first row starts from ``initial`` (an expression in the
    axes and parameters). ``target`` gives the field from theta.
    """

    def __init__(self, relation, target, unknown, axes: Sequence[str], params: Mapping[str, float], initial, tol: float = 1e-12, max_iter: int = 50):
        self.unknown = symbol(unknown)
        self.relation = canonical(sp.sympify(relation))
        self.derivative = differentiate(self.relation, self.unknown)
        self.target = canonical(sp.sympify(target))
        self.initial = canonical(sp.sympify(initial))
        self.axes = tuple(axes)
        self.params = {str(k): float(v) for k, v in params.items()}
        self.tol, self.max_iter = tol, max_iter
        self.max_relation_residual = 0.0
        self.iterations = 0
        # compiled only for the Newton inner loop; the field itself goes through evaluate()
        args = [self.unknown] + [sp.Symbol(a) for a in self.axes] + [sp.Symbol(p) for p in self.params]
        self._f = sp.lambdify(args, self.relation, "numpy")
        self._df = sp.lambdify(args, self.derivative, "numpy")

    def _env(self, coords, theta):
        env = dict(self.params)
        env.update(coords)
        env[self.unknown.name] = theta
        return env

    def solve_row(self, coords: Mapping[str, np.ndarray], guess: np.ndarray) -> np.ndarray:
        extra = [coords[a] for a in self.axes] + list(self.params.values())

        def f(th):
            with np.errstate(all="ignore"):
                return self._f(th, *extra)

        def df(th):
            with np.errstate(all="ignore"):
                return self._df(th, *extra)

        res = newton_solve(f, guess, self.tol, self.max_iter, df=df)
        self.iterations = max(self.iterations, res.iterations)
        check = np.max(np.abs(f(res.root)))
        self.max_relation_residual = max(self.max_relation_residual, float(check))
        return res.root

    def theta(self, **coords) -> np.ndarray:
        arrays = [np.asarray(coords[a], dtype=float) for a in self.axes]
        shape = np.broadcast(*arrays).shape
        arrays = [np.broadcast_to(a, shape) for a in arrays]
        if len(shape) < 2:
            arrays = [a.reshape(1, -1) for a in arrays]
        out = np.empty(arrays[0].shape)
        guess = None
        for i in range(arrays[0].shape[0]):
            row = {a: arr[i] for a, arr in zip(self.axes, arrays)}
            if guess is None:
                env = dict(self.params)
                env.update(row)
                guess = np.broadcast_to(np.asarray(evaluate(self.initial, env), dtype=float), arrays[0][i].shape)
            guess = self.solve_row(row, guess)
            out[i] = guess
        return out.reshape(shape)

    def __call__(self, **coords) -> np.ndarray:
        th = self.theta(**coords)
        env = self._env({a: np.broadcast_to(np.asarray(coords[a], dtype=float), th.shape) for a in self.axes}, th)
        return np.asarray(evaluate(self.target, env), dtype=float)

    def __repr__(self):
        return f"ImplicitSolution({to_text(self.relation)} = 0, target {to_text(self.target)})"
