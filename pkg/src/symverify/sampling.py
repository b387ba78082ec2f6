"""Seeded numeric sampling of residuals, the fallback when cancellation is not symbolic."""
from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .expr import (
    EvaluationError,
    OpaqueFunction,
    canonical,
    denominators,
    evaluate,
    opaque_applications,
)

__all__ = ["SamplingConfig", "SamplingError", "ExprSampler", "default_samplers", "sample_max_abs", "opaque_arities"]


class SamplingError(RuntimeError):
    pass


class ExprSampler:
    """Numeric stand-in for an opaque function, built from a concrete body.

    Derivatives of any order are taken symbolically from the body once and
    cached.
    """

    def __init__(self, body, params: Sequence):
        self.params = tuple(sp.Symbol(str(p)) for p in params)
        self.body = sp.sympify(body)
        self._cache: dict = {}

    def derivative(self, order):
        orders = (order,) if isinstance(order, int) else tuple(order)
        if orders not in self._cache:
            d = self.body
            for p, k in zip(self.params, orders):
                if k:
                    d = sp.diff(d, p, k)
            self._cache[orders] = canonical(d)
        return self._cache[orders]

    def __call__(self, order, *args):
        return evaluate(self.derivative(order), dict(zip(self.params, args)))


def default_samplers(arities: Mapping[str, int], seed: int = 0) -> dict[str, ExprSampler]:
    """Smooth, generic test functions for each opaque name (deterministic per seed)."""
    out = {}
    for name in sorted(arities):
        n = arities[name]
        rng = np.random.default_rng([seed, sum(map(ord, name)), len(name)])
        c = [sp.Rational(int(k), 8) for k in rng.integers(4, 13, size=3 + 2 * n)]
        ts = [sp.Symbol(f"_t{i}") for i in range(n)]
        lin = sum(ci * t for ci, t in zip(c[3 : 3 + n], ts))
        quad = sum(ci * t**2 for ci, t in zip(c[3 + n :], ts)) / 4
        body = c[0] + c[1] * sp.sin(lin + c[2]) + quad + lin / 3
        out[name] = ExprSampler(body, ts)
    return out


def opaque_arities(exprs) -> dict[str, int]:
    out = {}
    for e in exprs:
        for app in opaque_applications(sp.sympify(e)):
            out[app.opaque_name] = len(app.args)
    return out


@dataclass(frozen=True)
class SamplingConfig:
    samples: int = 200
    tolerance: float = 1e-10
    box: tuple[float, float] = (-2.0, 2.0)
    boxes: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    parameters: Mapping[str, Sequence[float]] = field(default_factory=dict)
    functions: Mapping[str, Callable] = field(default_factory=dict)
    denominator_margin: float = 1e-3
    max_retries: int = 200
    seed: int = 0
    cross_check: int = 50

    def with_seed(self, seed: int) -> "SamplingConfig":
        return SamplingConfig(**{**self.__dict__, "seed": seed})


def _scale(e, point, functions) -> float:
    terms = sp.Add.make_args(e)
    return float(sum(abs(evaluate(t, point, functions)) for t in terms))


def sample_max_abs(exprs, config: SamplingConfig, count: int | None = None, relative: bool = False):
    """Largest |residual| over ``count`` admissible random points.

    Parameters listed in ``config.parameters`` cycle through their values;
    every other free symbol is drawn uniformly from its box. Points where a
    denominator is within the margin of zero, or where evaluation leaves the
    real domain, are redrawn. With ``relative`` the residual is divided by
    ``1 + sum |terms|``.
    """
    exprs = [sp.sympify(e) for e in exprs]
    count = config.samples if count is None else count
    free = set()
    for e in exprs:
        free |= e.free_symbols
    params = {str(k): list(v) for k, v in config.parameters.items()}
    names = sorted(s.name for s in free if s.name not in params)
    functions = dict(default_samplers(opaque_arities(exprs), config.seed))
    functions.update(config.functions)
    dens = []
    for e in exprs:
        dens.extend(denominators(e))
    rng = np.random.default_rng(config.seed)
    worst = 0.0
    used = 0
    for i in range(count):
        for _attempt in range(config.max_retries):
            point = {p: float(vals[i % len(vals)]) for p, vals in params.items()}
            for n in names:
                lo, hi = config.boxes.get(n, config.box)
                point[n] = float(rng.uniform(lo, hi))
            try:
                if any(abs(evaluate(d, point, functions)) <= config.denominator_margin for d in dens):
                    continue
                vals = []
                for e in exprs:
                    v = abs(float(evaluate(e, point, functions)))
                    if relative:
                        v /= 1.0 + _scale(e, point, functions)
                    vals.append(v)
            except (EvaluationError, ZeroDivisionError, OverflowError):
                continue
            if not all(np.isfinite(vals)):
                continue
            worst = max(worst, *vals) if vals else worst
            used += 1
            break
        else:
            raise SamplingError(f"no admissible sample after {config.max_retries} retries (sample {i})")
    return worst, used
