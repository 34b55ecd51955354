"""Iteration loops for the gradient-descent schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .core import (
    LineSearchParams,
    Mode,
    NumericalFailure,
    Objective,
    Termination,
    Trace,
    TraceBuilder,
    Vector,
    as_vector,
    evaluate,
    norm,
)
from .growth import GrowthFunction, default_growth
from .linesearch import Phase, _trial, backtracking_search, growth_search, two_way_search

__all__ = [
    "Standard",
    "Backtracking",
    "Unbounded",
    "TwoWay",
    "Hybrid",
    "Scheme",
    "RunConfig",
    "run",
    "run_standard",
    "run_backtracking",
    "run_unbounded",
    "run_twoway",
    "run_hybrid",
]


@dataclass(frozen=True)
class Standard:
    """Fixed learning rate, no line search."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"standard GD needs delta > 0, got {self.delta}")

    @property
    def name(self) -> str:
        return "standard"


@dataclass(frozen=True)
class Backtracking:
    @property
    def name(self) -> str:
        return "backtracking"


@dataclass(frozen=True)
class Unbounded:
    """Unbounded backtracking; ``growth=None`` means ``delta0 * t**-0.5``."""

    growth: GrowthFunction | None = None

    @property
    def name(self) -> str:
        return "unbounded"


@dataclass(frozen=True)
class TwoWay:
    @property
    def name(self) -> str:
        return "twoway"


@dataclass(frozen=True)
class Hybrid:
    """Backtrack every ``N`` steps, reuse the last step size in between.

    A reused step is tried first and kept only if it passes ``guard``:
    ``"armijo"`` (default) demands Armijo's condition, ``"descent"`` only
    ``f(x_next) <= f(x)``. A rejected reuse falls back to backtracking.
    """

    N: int = 1
    guard: str = "armijo"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"hybrid period N must be a positive integer, got {self.N}")
        if self.guard not in ("armijo", "descent"):
            raise ValueError(f"guard must be 'armijo' or 'descent', got {self.guard!r}")

    @property
    def name(self) -> str:
        return f"hybrid(N={self.N})"


Scheme = Union[Standard, Backtracking, Unbounded, TwoWay, Hybrid]


@dataclass(frozen=True)
class RunConfig:
    scheme: Scheme
    x0: Vector
    params: LineSearchParams = field(default_factory=LineSearchParams)
    max_iters: int = 100_000
    divergence_x_threshold: float = 1e8
    divergence_f_threshold: float = -1e12

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0))
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not self.divergence_x_threshold > 0:
            raise ValueError("divergence_x_threshold must be positive")


# chooser(n, x, fx, g, gnorm, builder) -> (delta, exponent, mode)
Chooser = Callable[[int, Vector, float, Vector, float, TraceBuilder], tuple]


@np.errstate(over="ignore", invalid="ignore")
def _iterate(obj: Objective, cfg: RunConfig, choose: Chooser) -> Trace:
    x0 = cfg.x0
    if x0.shape != (obj.dim,):
        raise ValueError(f"{obj.name}: x0 has dimension {x0.size}, expected {obj.dim}")
    params = cfg.params
    builder = TraceBuilder(obj.name, cfg.scheme.name, x0)
    counter = obj.counter
    x = x0.copy()
    n = 0
    while True:
        v0, g0 = counter.snapshot()
        try:
            fx, g = evaluate(obj, x)
        except NumericalFailure:
            return builder.build(Termination.NUMERICAL_FAILURE, x, math.nan, math.nan,
                                 counter.value - v0, counter.grad - g0)
        gnorm = norm(g)
        stop = None
        if gnorm < params.grad_tol:
            stop = Termination.CRITICAL_POINT
        elif norm(x) > cfg.divergence_x_threshold:
            stop = Termination.DIVERGING_X
        elif fx < cfg.divergence_f_threshold:
            stop = Termination.DIVERGING_F
        elif n >= cfg.max_iters:
            stop = Termination.MAX_ITERS
        else:
            try:
                delta, exponent, mode = choose(n, x, fx, g, gnorm, builder)
            except NumericalFailure:
                stop = Termination.NUMERICAL_FAILURE
        if stop is not None:
            return builder.build(stop, x, fx, gnorm, counter.value - v0, counter.grad - g0)
        builder.append(x, fx, gnorm, delta, exponent,
                       counter.value - v0, counter.grad - g0, mode)
        x = x - delta * g
        if not np.isfinite(x).all():
            return builder.build(Termination.NUMERICAL_FAILURE, x, math.nan, math.nan, 0, 0)
        n += 1


def _expect(cfg: RunConfig, kind: type) -> None:
    if not isinstance(cfg.scheme, kind):
        raise TypeError(f"expected a {kind.__name__} scheme, got {cfg.scheme!r}")


def run_standard(obj: Objective, cfg: RunConfig) -> Trace:
    """``x_{n+1} = x_n - delta * grad f(x_n)`` with a fixed ``delta``."""
    _expect(cfg, Standard)
    delta = cfg.scheme.delta

    def choose(n, x, fx, g, gnorm, builder):
        return delta, None, Mode.STANDARD

    return _iterate(obj, cfg, choose)


def run_backtracking(obj: Objective, cfg: RunConfig) -> Trace:
    """Backtracking GD: every step is the largest Armijo grid step not above ``delta0``."""
    _expect(cfg, Backtracking)
    params = cfg.params

    def choose(n, x, fx, g, gnorm, builder):
        res = backtracking_search(obj, x, params, fx=fx, g=g)
        return res.delta, res.exponent, Mode.BACKTRACK

    return _iterate(obj, cfg, choose)


def run_unbounded(obj: Objective, cfg: RunConfig) -> Trace:
    """Unbounded backtracking GD driven by :func:`growth_search`."""
    _expect(cfg, Unbounded)
    params = cfg.params
    h = cfg.scheme.growth or default_growth(params.delta0)

    def choose(n, x, fx, g, gnorm, builder):
        res = growth_search(obj, x, params, h, fx=fx, g=g)
        mode = Mode.GROWTH if res.phase is Phase.GREW else Mode.BACKTRACK
        return res.delta, res.exponent, mode

    return _iterate(obj, cfg, choose)


def run_twoway(obj: Objective, cfg: RunConfig) -> Trace:
    """Two-way backtracking: each search starts from the previous accepted step."""
    _expect(cfg, TwoWay)
    params = cfg.params

    def choose(n, x, fx, g, gnorm, builder):
        if n == 0:
            prev, m_prev = params.delta0, 0
        else:
            prev, m_prev = builder.last_delta()
        res = two_way_search(obj, x, prev, params, fx=fx, g=g, exponent_prev=m_prev)
        mode = Mode.GROWTH if res.phase is Phase.GREW else Mode.BACKTRACK
        return res.delta, res.exponent, mode

    return _iterate(obj, cfg, choose)


def run_hybrid(obj: Objective, cfg: RunConfig) -> Trace:
    """Backtrack when ``n % N == 0``; otherwise reuse the previous step if the guard allows.

    A rejected reuse costs one value evaluation, counted in that step's record.
    """
    _expect(cfg, Hybrid)
    params = cfg.params
    N = cfg.scheme.N
    armijo_guard = cfg.scheme.guard == "armijo"

    def choose(n, x, fx, g, gnorm, builder):
        if n % N != 0:
            delta, m = builder.last_delta()
            if armijo_guard:
                ok, _ = _trial(obj, x, fx, g, delta, params.alpha)
            else:
                ok = obj.value(x - delta * g) <= fx
            if ok:
                return delta, m, Mode.REUSE
        res = backtracking_search(obj, x, params, fx=fx, g=g)
        return res.delta, res.exponent, Mode.BACKTRACK

    return _iterate(obj, cfg, choose)


_DISPATCH = {
    Standard: run_standard,
    Backtracking: run_backtracking,
    Unbounded: run_unbounded,
    TwoWay: run_twoway,
    Hybrid: run_hybrid,
}


def run(obj: Objective, cfg: RunConfig) -> Trace:
    """Run whichever driver matches ``cfg.scheme``."""
    return _DISPATCH[type(cfg.scheme)](obj, cfg)
