"""Post-run audits: check on a finished trace what the convergence theory predicts.

Everything here reads the trace, the objective's metadata and the run
config; nothing re-runs the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Mode, Objective, Termination, Trace, Vector
from .drivers import Hybrid, RunConfig

__all__ = [
    "TheoremAudit",
    "ARMIJO_SLACK",
    "audit",
    "armijo_violations",
    "partial_sums",
    "decile_means",
    "tail_fraction",
    "delta_lower_bounds",
    "hybrid_window_ok",
    "step_norm_witness",
    "ComparisonRow",
    "compare",
    "norm_below",
    "distance_below",
]

ARMIJO_SLACK = 1e-12
TAIL_FRACTION_LIMIT = 0.01
_LINESEARCH_MODES = (Mode.BACKTRACK, Mode.GROWTH, Mode.REUSE)


@dataclass(frozen=True)
class TheoremAudit:
    armijo_ok: bool
    descent_ok: bool
    step_norm_trend: tuple[float, float]
    partial_sum_tail_fraction: float
    final_grad_norm: float
    nearest_known_critical: Optional[tuple[Vector, float]]
    delta_lower_bound_ok: Optional[bool]
    hybrid_window_ok: Optional[bool]
    termination: Termination
    n_steps: int
    total_value_evals: int
    total_grad_evals: int

    def to_dict(self) -> dict:
        near = None
        if self.nearest_known_critical is not None:
            p, d = self.nearest_known_critical
            near = {"point": [float(v) for v in p], "distance": d}
        return {
            "termination": self.termination.value,
            "n_steps": self.n_steps,
            "armijo_ok": self.armijo_ok,
            "descent_ok": self.descent_ok,
            "step_norm_first_decile_mean": self.step_norm_trend[0],
            "step_norm_last_decile_mean": self.step_norm_trend[1],
            "partial_sum_tail_fraction": self.partial_sum_tail_fraction,
            "final_grad_norm": self.final_grad_norm,
            "nearest_known_critical": near,
            "delta_lower_bound_ok": self.delta_lower_bound_ok,
            "hybrid_window_ok": self.hybrid_window_ok,
            "total_value_evals": self.total_value_evals,
            "total_grad_evals": self.total_grad_evals,
        }


def _next_values(trace: Trace) -> np.ndarray:
    """``f(x_{n+1})`` for every recorded step (nan when the successor was never evaluated)."""
    return np.append(trace.f[1:], trace.final_f)[: trace.n_steps]


def armijo_violations(trace: Trace, alpha: float) -> np.ndarray:
    """Indices of line-search steps whose realized decrease misses Armijo's bound.

    Standard-mode steps are not audited. The slack is
    ``1e-12 * max(1, |f(x_n)|)``.
    """
    if trace.n_steps == 0:
        return np.empty(0, dtype=int)
    f_next = _next_values(trace)
    bound = -alpha * trace.delta * trace.grad_norm**2 + ARMIJO_SLACK * np.maximum(1.0, np.abs(trace.f))
    audited = np.isin(trace.mode_code, [list(Mode).index(m) for m in _LINESEARCH_MODES])
    with np.errstate(invalid="ignore"):
        bad = ~(f_next - trace.f <= bound)
    return np.flatnonzero(bad & audited)


def partial_sums(trace: Trace) -> np.ndarray:
    """Running sums of ``delta_n * |grad f(x_n)|^2``."""
    return np.cumsum(trace.delta * trace.grad_norm**2)


def tail_fraction(trace: Trace) -> float:
    """Share of the total ``sum delta_n |g_n|^2`` contributed by the last 10% of steps."""
    s = partial_sums(trace)
    if s.size == 0 or s[-1] == 0:
        return 0.0
    head = int(math.floor(0.9 * s.size))
    before = s[head - 1] if head > 0 else 0.0
    return float((s[-1] - before) / s[-1])


def decile_means(values: np.ndarray) -> tuple[float, float]:
    """Mean of the first and of the last ``max(1, n // 10)`` entries."""
    if values.size == 0:
        return 0.0, 0.0
    k = max(1, values.size // 10)
    return float(values[:k].mean()), float(values[-k:].mean())


def delta_lower_bounds(trace: Trace, obj: Objective, cfg: RunConfig) -> Optional[np.ndarray]:
    """``min(beta/L(x_n), beta*r(x_n)/|g_n|, delta0)`` per step, or None without Lipschitz data."""
    meta = obj.metadata
    if not meta.has_lipschitz:
        return None
    p = cfg.params
    out = np.empty(trace.n_steps)
    for i in range(trace.n_steps):
        r, L = meta.local_lipschitz(trace.xs[i])
        out[i] = min(p.beta / L, p.beta * r / trace.grad_norm[i], p.delta0)
    return out


def hybrid_window_ok(trace: Trace, N: int) -> bool:
    """Every ``N + 1`` consecutive records contain a backtracking step."""
    backtrack = trace.mode_code == list(Mode).index(Mode.BACKTRACK)
    gap = 0
    for b in backtrack:
        gap = 0 if b else gap + 1
        if gap > N:
            return False
    return True


def step_norm_witness(trace: Trace, min_steps: int = 50, limit: float = 1e-6) -> Optional[bool]:
    """Vanishing-step check for converged runs.

    Applies to CriticalPoint runs with at least ``min_steps`` steps: the
    last-decile mean step norm must be below ``limit`` and below the
    first-decile mean. Returns None when the run is exempt.
    """
    if trace.termination is not Termination.CRITICAL_POINT or trace.n_steps < min_steps:
        return None
    first, last = decile_means(trace.step_norm)
    return last < limit and last < first


def audit(trace: Trace, obj: Objective, cfg: RunConfig) -> TheoremAudit:
    """Recompute every theorem check from the trace alone.

    The step-size lower bound is audited on Backtrack and Growth steps only,
    and only when the objective declares ``(r, L)``; it assumes
    ``alpha <= 1/2``, which the default parameters satisfy.
    """
    p = cfg.params
    f_seq = trace.f_sequence()
    descent = bool(np.all(np.diff(f_seq) <= 0))
    near = None
    crit = obj.metadata.critical_points
    if crit:
        dists = [float(np.linalg.norm(trace.final_x - c)) for c in crit]
        j = int(np.argmin(dists))
        near = (crit[j], dists[j])
    lb_ok = None
    bounds = delta_lower_bounds(trace, obj, cfg)
    if bounds is not None:
        searched = np.isin(trace.mode_code, [list(Mode).index(Mode.BACKTRACK),
                                             list(Mode).index(Mode.GROWTH)])
        lb_ok = bool(np.all(trace.delta[searched] >= bounds[searched] - 1e-12))
    window = hybrid_window_ok(trace, cfg.scheme.N) if isinstance(cfg.scheme, Hybrid) else None
    return TheoremAudit(
        armijo_ok=armijo_violations(trace, p.alpha).size == 0,
        descent_ok=descent,
        step_norm_trend=decile_means(trace.step_norm),
        partial_sum_tail_fraction=tail_fraction(trace),
        final_grad_norm=trace.final_grad_norm,
        nearest_known_critical=near,
        delta_lower_bound_ok=lb_ok,
        hybrid_window_ok=window,
        termination=trace.termination,
        n_steps=trace.n_steps,
        total_value_evals=trace.total_value_evals,
        total_grad_evals=trace.total_grad_evals,
    )


@dataclass(frozen=True)
class ComparisonRow:
    scheme: str
    iters_to_target: float
    value_evals: int
    grad_evals: int
    termination: Termination


def norm_below(tol: float) -> Callable[[Vector], bool]:
    return lambda x: float(np.linalg.norm(x)) < tol


def distance_below(point, tol: float) -> Callable[[Vector], bool]:
    point = np.asarray(point, dtype=np.float64)
    return lambda x: float(np.linalg.norm(x - point)) < tol


def compare(traces: list[tuple[str, Trace]], target: Callable[[Vector], bool]) -> list[ComparisonRow]:
    """Iterations until ``target(x_n)`` first holds (``inf`` if never), plus eval totals.

    All traces must come from the same objective and start point.
    """
    if not traces:
        return []
    ref = traces[0][1]
    rows = []
    for scheme, t in traces:
        if t.objective != ref.objective or not np.array_equal(t.x0, ref.x0):
            raise ValueError(f"trace {scheme!r} does not share objective/x0 with {traces[0][0]!r}")
        hit = math.inf
        for n, x in enumerate(t.iterates()):
            if np.all(np.isfinite(x)) and target(x):
                hit = n
                break
        rows.append(ComparisonRow(scheme, hit, t.total_value_evals, t.total_grad_evals, t.termination))
    return rows
