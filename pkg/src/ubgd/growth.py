"""Caps on the learning rate as a function of the gradient norm.

A growth function ``h`` bounds how large an unbounded-backtracking step may
get at a point whose gradient has norm ``t``. Convergence needs
``t * h(t) -> 0`` as ``t -> 0``; :class:`GrowthFunction` checks a finite
surrogate of that on the grid ``t = 1e-1, ..., 1e-12``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "GrowthFunction",
    "PRODUCT_TOL",
    "T_GRID",
    "h_eval",
    "h_effective",
    "default_growth",
    "vanishing_product_check",
]

#: log grid on which the vanishing-product condition is checked
T_GRID = 10.0 ** -np.arange(1, 13)
#: t * h(t) must drop below this once t <= t_star
PRODUCT_TOL = 1e-6


@dataclass(frozen=True)
class GrowthFunction:
    """``h(t) = C * t**(-gamma)``, a constant ``c``, or an arbitrary callable.

    Build instances with :meth:`power_law`, :meth:`constant` or :meth:`custom`.
    Custom callables must declare ``t_star``: for every grid point
    ``t <= t_star`` the product ``t * h(t)`` has to stay below
    :data:`PRODUCT_TOL`, must not grow as ``t`` shrinks, and must end lower
    than it starts. ``h(t) = 1/t`` and friends are rejected at
    construction.
    """

    kind: str
    C: float = 1.0
    gamma: float = 0.5
    c: float = 1.0
    func: Optional[Callable[[float], float]] = field(default=None, compare=False)
    t_star: Optional[float] = None
    description: str = ""

    def __post_init__(self):
        if self.kind == "power_law":
            if not (self.C > 0 and math.isfinite(self.C)):
                raise ValueError(f"power law needs C > 0, got {self.C}")
            if not 0 < self.gamma < 1:
                raise ValueError(f"power law needs gamma in (0, 1), got {self.gamma}")
        elif self.kind == "constant":
            if not (self.c > 0 and math.isfinite(self.c)):
                raise ValueError(f"constant cap must be positive, got {self.c}")
        elif self.kind == "custom":
            if self.func is None:
                raise ValueError("custom growth function needs a callable")
            _check_custom(self.func, self.t_star)
        else:
            raise ValueError(f"unknown growth function kind {self.kind!r}")
        if not self.description:
            object.__setattr__(self, "description", self._describe())

    @classmethod
    def power_law(cls, C: float = 1.0, gamma: float = 0.5) -> "GrowthFunction":
        return cls("power_law", C=C, gamma=gamma)

    @classmethod
    def constant(cls, c: float) -> "GrowthFunction":
        return cls("constant", c=c)

    @classmethod
    def custom(cls, func: Callable[[float], float], t_star: float = 1e-12,
               description: str = "") -> "GrowthFunction":
        return cls("custom", func=func, t_star=t_star, description=description)

    @classmethod
    def from_config(cls, spec: dict) -> "GrowthFunction":
        """Parse ``{"kind": "power_law", "C": 1.0, "gamma": 0.5}`` or ``{"kind": "constant", "c": 2}``."""
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "power_law":
            allowed = {"C", "gamma"}
        elif kind == "constant":
            allowed = {"c"}
        else:
            raise ValueError(f"growth.kind must be 'power_law' or 'constant', got {kind!r}")
        extra = set(spec) - allowed
        if extra:
            raise ValueError(f"unexpected growth keys {sorted(extra)}")
        return cls(kind, **{k: float(v) for k, v in spec.items()})

    def to_config(self) -> dict:
        if self.kind == "power_law":
            return {"kind": "power_law", "C": self.C, "gamma": self.gamma}
        if self.kind == "constant":
            return {"kind": "constant", "c": self.c}
        return {"kind": "custom", "description": self.description}

    def __call__(self, t: float) -> float:
        return h_eval(self, t)

    def _describe(self) -> str:
        if self.kind == "power_law":
            return f"{self.C:g} * t^-{self.gamma:g}"
        if self.kind == "constant":
            return f"{self.c:g}"
        return getattr(self.func, "__name__", "custom")


def _check_custom(func, t_star):
    if t_star is None or not t_star >= T_GRID[-1]:
        raise ValueError(f"t_star must be at least {T_GRID[-1]:g}, got {t_star}")
    for t in T_GRID:
        if not func(float(t)) > 0:
            raise ValueError(f"growth function must be positive, h({t:g}) = {func(float(t))}")
    ts = T_GRID[T_GRID <= t_star]
    products = [float(t) * func(float(t)) for t in ts]
    worst = max(products)
    if worst >= PRODUCT_TOL:
        raise ValueError(
            f"t*h(t) does not vanish: reaches {worst:g} at t <= {t_star:g} (limit {PRODUCT_TOL:g})"
        )
    if any(b > a for a, b in zip(products, products[1:])):
        raise ValueError("t*h(t) increases as t decreases below t_star")
    if len(products) > 1 and not products[-1] < products[0]:
        raise ValueError("t*h(t) stays flat below t_star instead of vanishing")


def h_eval(h: GrowthFunction, t: float) -> float:
    """Raw cap ``h(t)`` for ``t > 0``."""
    if not t > 0:
        raise ValueError(f"growth function is defined for t > 0, got {t}")
    if h.kind == "power_law":
        return h.C * t ** (-h.gamma)
    if h.kind == "constant":
        return h.c
    value = float(h.func(t))
    if not value > 0:
        raise ValueError(f"growth function returned non-positive h({t}) = {value}")
    return value


def h_effective(h: GrowthFunction, t: float, delta0: float) -> float:
    """``max(h(t), delta0)``, so the backtracking step is always admissible."""
    if not delta0 > 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    return max(h_eval(h, t), delta0)


def default_growth(delta0: float) -> GrowthFunction:
    """``delta0 * t**-0.5``."""
    return GrowthFunction.power_law(C=delta0, gamma=0.5)


def vanishing_product_check(h: GrowthFunction, delta0: float) -> dict:
    """Tabulate ``t * h_effective(t)`` on :data:`T_GRID` and test that it vanishes.

    The product must strictly decrease along the grid. For power laws its
    last value is also compared to ``1e-11*delta0 + 2*C*1e-12**(1-gamma)``.
    """
    products = np.array([t * h_effective(h, float(t), delta0) for t in T_GRID])
    decreasing = bool(np.all(np.diff(products) < 0))
    bound = None
    if h.kind == "power_law":
        bound = 1e-11 * delta0 + 2.0 * h.C * T_GRID[-1] ** (1 - h.gamma)
    within = bound is None or bool(products[-1] < bound)
    return {
        "t": T_GRID.tolist(),
        "product": products.tolist(),
        "strictly_decreasing": decreasing,
        "final_product": float(products[-1]),
        "bound": bound,
        "passed": decreasing and within,
    }
