"""Armijo's condition and the step-size searches built on it.

All searches move on the grid ``{beta**m * delta0 : m integer}`` and track the
integer exponent ``m``; the float step is always recomputed from ``m`` with
:meth:`LineSearchParams.grid_value`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import LineSearchParams, NumericalFailure, Objective, Vector, evaluate, norm
from .growth import GrowthFunction, h_effective

__all__ = [
    "Phase",
    "SearchResult",
    "LineSearchFailure",
    "armijo_test",
    "armijo_holds",
    "backtracking_search",
    "growth_search",
    "two_way_search",
]

log = logging.getLogger(__name__)

# overflow in a trial point is reported through the Armijo result, not as a warning
_quiet = np.errstate(over="ignore", invalid="ignore")


class Phase(enum.Enum):
    SHRUNK = "Shrunk"
    GREW = "Grew"
    UNCHANGED = "Unchanged"


class LineSearchFailure(NumericalFailure):
    """No grid step within ``max_halvings`` shrinks satisfies Armijo's condition."""


@dataclass(frozen=True)
class SearchResult:
    delta: float
    exponent: int
    n_value_evals: int
    phase: Phase
    overflowed: bool = False


def _trial(obj, x, fx, g, delta, alpha):
    f_trial = obj.value(x - delta * g)
    if not math.isfinite(f_trial):
        return False, True
    return f_trial - fx <= -alpha * delta * float(np.dot(g, g)), False


@_quiet
def armijo_test(obj: Objective, x: Vector, fx: float, g: Vector, delta: float,
                alpha: float) -> tuple[bool, bool]:
    """Evaluate ``f(x - delta*g) - f(x) <= -alpha*delta*|g|^2`` once.

    Returns ``(holds, overflowed)``. A non-finite trial value makes the
    condition false and sets ``overflowed``.
    """
    return _trial(obj, x, fx, g, delta, alpha)


@_quiet
def armijo_holds(obj: Objective, x: Vector, fx: float, g: Vector, delta: float,
                 alpha: float) -> bool:
    """Truth of Armijo's condition at step ``delta``; costs one value evaluation."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return _trial(obj, x, fx, g, delta, alpha)[0]


def _require_noncritical(g: Vector, params: LineSearchParams) -> float:
    gnorm = norm(g)
    if gnorm < params.grad_tol:
        raise ValueError(
            f"gradient norm {gnorm:.3g} is below grad_tol={params.grad_tol:g}; "
            "the point is treated as critical and has no line search"
        )
    return gnorm


def _shrink(obj, x, fx, g, params, m, evals, overflowed):
    """Shrink from exponent ``m`` (known to fail) until Armijo holds."""
    limit = max(m, 0) + params.max_halvings
    while True:
        m += 1
        if m > limit:
            raise LineSearchFailure(
                f"{obj.name}: Armijo still fails after {params.max_halvings} halvings at x={x}"
            )
        ok, over = _trial(obj, x, fx, g, params.grid_value(m), params.alpha)
        evals += 1
        overflowed |= over
        if ok:
            return SearchResult(params.grid_value(m), m, evals, Phase.SHRUNK, overflowed)


def _eval_point(obj, x, fx, g):
    if fx is None or g is None:
        fx, g = evaluate(obj, x)
    return fx, g


@_quiet
def backtracking_search(obj: Objective, x: Vector, params: LineSearchParams,
                        fx: float | None = None, g: Vector | None = None) -> SearchResult:
    """Largest ``beta**m * delta0`` (``m = 0, 1, 2, ...``) satisfying Armijo's condition.

    ``fx`` and ``g`` may be passed when the caller already evaluated them;
    otherwise they are computed (and counted) here. ``n_value_evals`` counts
    only the Armijo trials.

    Raises:
        ValueError: the gradient norm is below ``grad_tol``.
        LineSearchFailure: Armijo fails for every ``m <= max_halvings``.
    """
    fx, g = _eval_point(obj, x, fx, g)
    _require_noncritical(g, params)
    ok, over = _trial(obj, x, fx, g, params.grid_value(0), params.alpha)
    if ok:
        return SearchResult(params.grid_value(0), 0, 1, Phase.UNCHANGED, over)
    return _shrink(obj, x, fx, g, params, 0, 1, over)


@_quiet
def growth_search(obj: Objective, x: Vector, params: LineSearchParams, h: GrowthFunction,
                  fx: float | None = None, g: Vector | None = None) -> SearchResult:
    """Discrete unbounded-backtracking step.

    Start at ``delta0``. If Armijo fails there, shrink exactly like
    :func:`backtracking_search`. Otherwise keep dividing by ``beta`` while the
    new step still satisfies Armijo and stays at or below
    ``h_effective(|g|)``; the last admissible step is returned. The cap is
    checked first, so a blocked step costs no evaluation. Growth also stops
    after ``max_halvings`` enlargements.
    """
    fx, g = _eval_point(obj, x, fx, g)
    gnorm = _require_noncritical(g, params)
    ok, over = _trial(obj, x, fx, g, params.grid_value(0), params.alpha)
    if not ok:
        return _shrink(obj, x, fx, g, params, 0, 1, over)
    cap = h_effective(h, gnorm, params.delta0)
    m, evals = 0, 1
    while m > -params.max_halvings:
        candidate = params.grid_value(m - 1)
        if candidate > cap:
            break
        ok, o = _trial(obj, x, fx, g, candidate, params.alpha)
        evals += 1
        over |= o
        if not ok:
            break
        m -= 1
    phase = Phase.GREW if m < 0 else Phase.UNCHANGED
    return SearchResult(params.grid_value(m), m, evals, phase, over)


def _exponent_of(delta: float, params: LineSearchParams) -> int:
    """Smallest ``m >= 0`` with ``grid_value(m) <= delta`` (within 1e-12 relative)."""
    m = max(0, math.floor(math.log(delta / params.delta0) / math.log(params.beta)))
    while m > 0 and params.grid_value(m - 1) <= delta * (1 + 1e-12):
        m -= 1
    while params.grid_value(m) > delta * (1 + 1e-12):
        m += 1
    return m


@_quiet
def two_way_search(obj: Objective, x: Vector, delta_prev: float, params: LineSearchParams,
                   fx: float | None = None, g: Vector | None = None,
                   exponent_prev: int | None = None) -> SearchResult:
    """Warm-started backtracking capped at ``delta0``.

    Start from the previous accepted step. If Armijo fails, shrink until it
    holds; if it holds, divide by ``beta`` while Armijo still holds and the
    step does not exceed ``delta0``.

    ``delta_prev`` outside ``(0, delta0]`` is clamped to ``delta0`` with a
    warning. A value between grid points is rounded down to the grid; pass
    ``exponent_prev`` to skip that reconstruction.
    """
    fx, g = _eval_point(obj, x, fx, g)
    _require_noncritical(g, params)
    if exponent_prev is not None:
        if exponent_prev < 0:
            log.warning("exponent_prev=%d is above delta0; clamping to 0", exponent_prev)
            exponent_prev = 0
        m0 = exponent_prev
    elif not (0 < delta_prev <= params.delta0) or not math.isfinite(delta_prev):
        log.warning("delta_prev=%r outside (0, delta0=%g]; clamping to delta0",
                    delta_prev, params.delta0)
        m0 = 0
    else:
        m0 = _exponent_of(delta_prev, params)
    m = m0
    ok, over = _trial(obj, x, fx, g, params.grid_value(m), params.alpha)
    if not ok:
        return _shrink(obj, x, fx, g, params, m, 1, over)
    evals = 1
    while m > 0:
        ok, o = _trial(obj, x, fx, g, params.grid_value(m - 1), params.alpha)
        evals += 1
        over |= o
        if not ok:
            break
        m -= 1
    phase = Phase.GREW if m < m0 else Phase.UNCHANGED
    return SearchResult(params.grid_value(m), m, evals, phase, over)
