"""Test objectives with hand-coded gradients and local Lipschitz data.

Each entry carries the box used for sampling start points and checks, and
the local Lipschitz pair ``(r, L)`` where one is known in closed form. An
infinite radius is encoded as ``BIG_RADIUS``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import KnownAnalysis, Objective, Vector, norm

__all__ = [
    "BIG_RADIUS",
    "CorpusEntry",
    "corpus_list",
    "corpus_names",
    "get_entry",
    "gradient_check",
    "lipschitz_audit",
]

BIG_RADIUS = 1e6
TAGS = frozenset({"flat-gradient", "saddle", "unbounded-below", "countable-critical", "multi-min"})


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    objective: Objective
    test_box: tuple[tuple[float, float], ...]
    scenario_tags: frozenset[str]

    def __post_init__(self):
        if len(self.test_box) != self.objective.dim:
            raise ValueError(f"{self.name}: test box dimension mismatch")
        unknown = self.scenario_tags - TAGS
        if unknown:
            raise ValueError(f"{self.name}: unknown tags {sorted(unknown)}")

    @property
    def dim(self) -> int:
        return self.objective.dim

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Uniform points in the test box: one vector, or an ``(n, dim)`` array."""
        lo = np.array([a for a, _ in self.test_box])
        hi = np.array([b for _, b in self.test_box])
        size = (self.dim,) if n is None else (n, self.dim)
        return lo + (hi - lo) * rng.random(size)


def _const(c: float) -> Callable[[Vector], float]:
    return lambda x: c


# --- objectives -------------------------------------------------------------

def _quadratic(x):
    return 0.5 * float(np.dot(x, x))


def _quadratic_grad(x):
    return x.copy()


def _quartic(x):
    x2 = x * x
    return 0.25 * float(np.dot(x2, x2))


def _quartic_grad(x):
    return x * x * x


def _quartic_L(x):
    # Hessian diag(3 x_i^2); on B(x, 1) each |y_i| <= max|x_i| + 1
    return 3.0 * (float(np.max(np.abs(x))) + 1.0) ** 2


def _rosenbrock(x):
    a = 1.0 - x[0]
    b = x[1] - x[0] * x[0]
    return float(a * a + 100.0 * b * b)


def _rosenbrock_grad(x):
    b = x[1] - x[0] * x[0]
    return np.array([-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b])


def _rosenbrock_L(x):
    # Frobenius bound on the Hessian over B(x, 1)
    X = abs(float(x[0])) + 1.0
    Y = abs(float(x[1])) + 1.0
    a = 1200.0 * X * X + 400.0 * Y + 2.0
    b = 400.0 * X
    return math.sqrt(a * a + 2.0 * b * b + 200.0 * 200.0)


def _saddle(x):
    return float(x[0] * x[0] - x[1] * x[1])


def _saddle_grad(x):
    return np.array([2.0 * x[0], -2.0 * x[1]])


def _linear(x):
    return -float(np.sum(x))


def _linear_grad(x):
    return -np.ones_like(x)


def _double_well(x):
    u = x[0] * x[0] - 1.0
    return float(u * u)


def _double_well_grad(x):
    return np.array([4.0 * x[0] * (x[0] * x[0] - 1.0)])


def _double_well_L(x):
    # |f''(y)| = |12 y^2 - 4| <= 12 (|x| + 1)^2 - 4 on B(x, 1)
    return 12.0 * (abs(float(x[0])) + 1.0) ** 2 - 4.0


def _cubic(x):
    return float(x[0] ** 3)


def _cubic_grad(x):
    return np.array([3.0 * x[0] * x[0]])


def _cubic_L(x):
    return 6.0 * (abs(float(x[0])) + 1.0)


def _box(k: int, lo: float, hi: float):
    return tuple((lo, hi) for _ in range(k))


def _make(name, dim, fun, grad, box, tags, **meta) -> CorpusEntry:
    crit = meta.pop("critical_points", None)
    if crit is not None:
        crit = tuple(np.asarray(c, dtype=np.float64) for c in crit)
    analysis = KnownAnalysis(critical_points=crit, **meta)
    return CorpusEntry(name, Objective(name, dim, fun, grad, analysis), box, frozenset(tags))


def corpus_list() -> list[CorpusEntry]:
    """Fresh entries (with zeroed counters) in a fixed order."""
    entries = []
    for k in (1, 2, 10):
        entries.append(_make(
            f"quadratic-{k}d", k, _quadratic, _quadratic_grad, _box(k, -5.0, 5.0),
            {"countable-critical"},
            critical_points=[np.zeros(k)], lipschitz_r=_const(BIG_RADIUS),
            lipschitz_L=_const(1.0), global_min=0.0,
        ))
    for k in (1, 2):
        entries.append(_make(
            f"quartic-{k}d", k, _quartic, _quartic_grad, _box(k, -2.0, 2.0),
            {"flat-gradient", "countable-critical"},
            critical_points=[np.zeros(k)], lipschitz_r=_const(1.0),
            lipschitz_L=_quartic_L, global_min=0.0,
        ))
    entries += [
        _make("rosenbrock", 2, _rosenbrock, _rosenbrock_grad, _box(2, -2.0, 2.0),
              {"countable-critical"},
              critical_points=[[1.0, 1.0]], lipschitz_r=_const(1.0),
              lipschitz_L=_rosenbrock_L, global_min=0.0),
        _make("saddle", 2, _saddle, _saddle_grad, _box(2, -2.0, 2.0),
              {"saddle", "unbounded-below", "countable-critical"},
              critical_points=[[0.0, 0.0]], lipschitz_r=_const(BIG_RADIUS),
              lipschitz_L=_const(2.0), unbounded_below=True),
        _make("linear", 1, _linear, _linear_grad, _box(1, -5.0, 5.0),
              {"unbounded-below"},
              critical_points=[], lipschitz_r=_const(BIG_RADIUS),
              lipschitz_L=_const(1.0), unbounded_below=True),
        _make("double-well", 1, _double_well, _double_well_grad, _box(1, -2.0, 2.0),
              {"multi-min", "countable-critical"},
              critical_points=[[-1.0], [0.0], [1.0]], lipschitz_r=_const(1.0),
              lipschitz_L=_double_well_L, global_min=0.0),
        _make("cubic", 1, _cubic, _cubic_grad, _box(1, -2.0, 2.0),
              {"flat-gradient", "unbounded-below", "countable-critical"},
              critical_points=[[0.0]], lipschitz_r=_const(1.0),
              lipschitz_L=_cubic_L, unbounded_below=True),
    ]
    return entries


def corpus_names() -> list[str]:
    return [e.name for e in corpus_list()]


def get_entry(name: str) -> CorpusEntry:
    for e in corpus_list():
        if e.name == name:
            return e
    raise KeyError(f"unknown objective {name!r}; choose from {', '.join(corpus_names())}")


def _fd_gradient(fun, x, step):
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        # divide by the spacing actually represented, not 2*step
        g[i] = (fun(xp) - fun(xm)) / (xp[i] - xm[i])
    return g


def gradient_check(entry: CorpusEntry, n_samples: int = 100, fd_step: float = 1e-6,
                   seed: int = 0) -> dict:
    """Compare the analytic gradient with central differences at random box points.

    The error at a point is ``|g_fd - g| / max(|g|, 1)``; the report carries
    the maximum over the samples. Raw (uncounted) functions are used so the
    check leaves the objective's counters alone.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    obj = entry.objective
    rng = np.random.default_rng(seed)
    worst, worst_x = 0.0, None
    for x in entry.sample(rng, n_samples):
        g = np.asarray(obj.grad(x), dtype=np.float64)
        fd = _fd_gradient(obj.fun, x, fd_step)
        err = norm(fd - g) / max(norm(g), 1.0)
        if err > worst or worst_x is None:
            worst, worst_x = err, x
    return {"name": entry.name, "n_samples": n_samples, "fd_step": fd_step,
            "max_rel_error": worst, "worst_point": None if worst_x is None else worst_x.tolist()}


def lipschitz_audit(entry: CorpusEntry, n_pairs: int = 1000, seed: int = 0) -> dict:
    """Sample ``x`` in the box and ``y`` in ``B(x, r(x))``; report the worst ratio.

    The ratio is ``|grad f(y) - grad f(x)| / (L(x) |y - x|)``, so a declared
    pair is valid when the worst ratio stays at or below one (up to the
    1e-12 slack). The radius used for ``y`` is ``min(r(x), box diameter)``.
    """
    obj = entry.objective
    meta = obj.metadata
    if not meta.has_lipschitz:
        return {"name": entry.name, "skipped": True, "reason": "no Lipschitz data",
                "worst_ratio": None, "passed": True}
    rng = np.random.default_rng(seed)
    diam = float(np.linalg.norm([b - a for a, b in entry.test_box]))
    worst, ok = 0.0, True
    for x in entry.sample(rng, n_pairs):
        r, L = meta.local_lipschitz(x)
        radius = min(r, diam)
        d = rng.standard_normal(entry.dim)
        d *= radius * rng.random() ** (1.0 / entry.dim) / norm(d)
        y = x + d
        dist = norm(y - x)
        if not 0 < dist <= r:
            continue
        diff = norm(np.asarray(obj.grad(y)) - np.asarray(obj.grad(x)))
        ok &= diff <= L * dist + 1e-12
        worst = max(worst, diff / (L * dist))
    return {"name": entry.name, "skipped": False, "n_pairs": n_pairs,
            "worst_ratio": worst, "passed": bool(ok)}
