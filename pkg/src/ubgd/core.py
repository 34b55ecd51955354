"""Shared types: vectors, counted objectives, line-search parameters, traces."""

from __future__ import annotations

import enum
import math
from array import array
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Vector",
    "as_vector",
    "norm",
    "NumericalFailure",
    "EvalCounter",
    "KnownAnalysis",
    "Objective",
    "evaluate",
    "LineSearchParams",
    "Mode",
    "Termination",
    "StepRecord",
    "Trace",
    "TraceBuilder",
]

Vector = np.ndarray


class NumericalFailure(ArithmeticError):
    """Raised when an objective produces non-finite output or a search runs away."""


def as_vector(x, dim: Optional[int] = None) -> Vector:
    """Copy ``x`` into a fresh 1-D float64 array, rejecting NaN/Inf."""
    v = np.array(x, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("vector must have at least one coordinate")
    if dim is not None and v.size != dim:
        raise ValueError(f"expected dimension {dim}, got {v.size}")
    if not np.isfinite(v).all():
        raise ValueError(f"vector has non-finite entries: {v}")
    return v


def norm(v: Vector) -> float:
    """Euclidean norm."""
    return math.sqrt(float(np.dot(v, v)))


@dataclass
class EvalCounter:
    value: int = 0
    grad: int = 0

    def snapshot(self) -> tuple[int, int]:
        return self.value, self.grad


@dataclass(frozen=True)
class KnownAnalysis:
    """Facts about an objective used by the audits.

    ``lipschitz_r`` and ``lipschitz_L`` describe a local Lipschitz bound for the
    gradient: on the ball of radius ``r(x)`` around ``x`` the gradient is
    ``L(x)``-Lipschitz. They come as a pair or not at all.
    """

    critical_points: Optional[tuple[Vector, ...]] = None
    lipschitz_r: Optional[Callable[[Vector], float]] = None
    lipschitz_L: Optional[Callable[[Vector], float]] = None
    global_min: Optional[float] = None
    unbounded_below: bool = False

    def __post_init__(self):
        if (self.lipschitz_r is None) != (self.lipschitz_L is None):
            raise ValueError("lipschitz_r and lipschitz_L must be given together")

    @property
    def has_lipschitz(self) -> bool:
        return self.lipschitz_r is not None

    def local_lipschitz(self, x: Vector) -> tuple[float, float]:
        """Return ``(r(x), L(x))``, checking both are strictly positive."""
        if not self.has_lipschitz:
            raise ValueError("no Lipschitz data")
        r = float(self.lipschitz_r(x))
        L = float(self.lipschitz_L(x))
        if not (r > 0 and L > 0):
            raise ValueError(f"Lipschitz data must be positive, got r={r}, L={L}")
        return r, L


@dataclass
class Objective:
    """A C^1 cost function with a hand-coded gradient and evaluation counters.

    The counters are the only mutable state. Give each concurrent run its own
    instance (see :meth:`fresh`).
    """

    name: str
    dim: int
    fun: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    metadata: KnownAnalysis = field(default_factory=KnownAnalysis)
    counter: EvalCounter = field(default_factory=EvalCounter)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def value(self, x: Vector) -> float:
        """Counted value evaluation; may return inf/nan, callers decide."""
        self.counter.value += 1
        return float(self.fun(x))

    def gradient(self, x: Vector) -> Vector:
        self.counter.grad += 1
        g = np.asarray(self.grad(x), dtype=np.float64)
        if g.shape != (self.dim,):
            raise ValueError(f"{self.name}: gradient has shape {g.shape}, expected ({self.dim},)")
        return g

    def fresh(self) -> "Objective":
        """Same function with zeroed counters."""
        return Objective(self.name, self.dim, self.fun, self.grad, self.metadata)


def evaluate(obj: Objective, x: Vector) -> tuple[float, Vector]:
    """Return ``(f(x), grad f(x))``, counting one value and one gradient call.

    Raises:
        ValueError: ``x`` has the wrong dimension.
        NumericalFailure: the value or the gradient is not finite.
    """
    if x.shape != (obj.dim,):
        raise ValueError(f"{obj.name}: expected dimension {obj.dim}, got shape {x.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        fx = obj.value(x)
        g = obj.gradient(x)
    if not math.isfinite(fx) or not np.isfinite(g).all():
        raise NumericalFailure(f"{obj.name}: non-finite evaluation at {x}")
    return fx, g


@dataclass(frozen=True)
class LineSearchParams:
    """Armijo constant ``alpha``, shrink factor ``beta`` and initial step ``delta0``.

    ``grad_tol`` decides when a point counts as critical and ``max_halvings``
    caps how far a search may shrink (or grow) the step.
    """

    alpha: float = 0.5
    beta: float = 0.5
    delta0: float = 1.0
    grad_tol: float = 1e-10
    max_halvings: int = 200

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not (self.delta0 > 0 and math.isfinite(self.delta0)):
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_halvings < 1:
            raise ValueError(f"max_halvings must be positive, got {self.max_halvings}")

    def grid_value(self, exponent: int) -> float:
        """``beta**exponent * delta0`` by repeated multiplication (division for m < 0).

        Every search goes through this, so the same exponent always maps to the
        same float.
        """
        d = self.delta0
        if exponent >= 0:
            for _ in range(exponent):
                d *= self.beta
        else:
            for _ in range(-exponent):
                d /= self.beta
        return d


class Mode(enum.Enum):
    BACKTRACK = "Backtrack"
    GROWTH = "Growth"
    REUSE = "Reuse"
    STANDARD = "Standard"


class Termination(enum.Enum):
    CRITICAL_POINT = "CriticalPoint"
    MAX_ITERS = "MaxIters"
    DIVERGING_F = "DivergingF"
    DIVERGING_X = "DivergingX"
    NUMERICAL_FAILURE = "NumericalFailure"


_MODES = list(Mode)
_MODE_CODE = {m: i for i, m in enumerate(_MODES)}
_NO_EXPONENT = -(2**62)


@dataclass(frozen=True)
class StepRecord:
    """One iteration: the iterate, its value and gradient norm, and the step taken.

    ``step_norm`` is ``delta * grad_norm``, the exact length of the intended
    displacement. ``n_value_evals``/``n_grad_evals`` include the evaluation of
    ``f`` and its gradient at ``x`` plus everything the line search spent.
    """

    iter: int
    x: Vector
    f_val: float
    grad_norm: float
    delta: float
    exponent: Optional[int]
    step_norm: float
    n_value_evals: int
    n_grad_evals: int
    mode: Mode

    @property
    def n_evals(self) -> int:
        return self.n_value_evals


class _Records(Sequence):
    """Read-only list-like view that materializes StepRecords on demand."""

    def __init__(self, trace: "Trace"):
        self._t = trace

    def __len__(self) -> int:
        return len(self._t.f)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        t = self._t
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(i)
        e = int(t.exponent[i])
        return StepRecord(
            iter=i,
            x=t.xs[i].copy(),
            f_val=float(t.f[i]),
            grad_norm=float(t.grad_norm[i]),
            delta=float(t.delta[i]),
            exponent=None if e == _NO_EXPONENT else e,
            step_norm=float(t.step_norm[i]),
            n_value_evals=int(t.n_value_evals[i]),
            n_grad_evals=int(t.n_grad_evals[i]),
            mode=_MODES[t.mode_code[i]],
        )

    def __iter__(self) -> Iterator[StepRecord]:
        for i in range(len(self)):
            yield self[i]


@dataclass(eq=False)
class Trace:
    """Result of one run, stored column-wise.

    Row ``i`` of every column describes step ``i``; ``records`` gives the same
    data as :class:`StepRecord` objects. The terminal iterate ``final_x`` has
    no row; its evaluation (if any succeeded) is counted in
    ``final_value_evals``/``final_grad_evals``.
    """

    objective: str
    scheme: str
    x0: Vector
    xs: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    delta: np.ndarray
    exponent: np.ndarray
    step_norm: np.ndarray
    n_value_evals: np.ndarray
    n_grad_evals: np.ndarray
    mode_code: np.ndarray
    termination: Termination
    final_x: Vector
    final_f: float
    final_grad_norm: float
    final_value_evals: int
    final_grad_evals: int

    @property
    def records(self) -> _Records:
        return _Records(self)

    @property
    def n_steps(self) -> int:
        return len(self.f)

    @property
    def modes(self) -> list[Mode]:
        return [_MODES[c] for c in self.mode_code]

    @property
    def total_value_evals(self) -> int:
        return int(self.n_value_evals.sum()) + self.final_value_evals

    @property
    def total_grad_evals(self) -> int:
        return int(self.n_grad_evals.sum()) + self.final_grad_evals

    def f_sequence(self) -> np.ndarray:
        """Values at every iterate including ``final_x`` (when it was evaluated)."""
        if math.isfinite(self.final_f):
            return np.append(self.f, self.final_f)
        return self.f.copy()

    def iterates(self) -> np.ndarray:
        """All iterates ``x_0 .. x_N`` as rows (``x_N = final_x``)."""
        return np.vstack([self.xs, self.final_x[None, :]])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        arrays = ("x0", "xs", "f", "grad_norm", "delta", "exponent", "step_norm",
                  "n_value_evals", "n_grad_evals", "mode_code", "final_x")
        scalars = ("objective", "termination", "final_value_evals", "final_grad_evals")
        return (
            all(_same_array(getattr(self, a), getattr(other, a)) for a in arrays)
            and all(getattr(self, s) == getattr(other, s) for s in scalars)
            and _same_float(self.final_f, other.final_f)
            and _same_float(self.final_grad_norm, other.final_grad_norm)
        )


def _same_array(a: np.ndarray, b: np.ndarray) -> bool:
    return np.array_equal(a, b, equal_nan=a.dtype.kind == "f")


def _same_float(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


class TraceBuilder:
    """Append-only accumulator used by the drivers."""

    def __init__(self, objective: str, scheme: str, x0: Vector):
        self.objective = objective
        self.scheme = scheme
        self.x0 = x0.copy()
        self.dim = x0.size
        self._xs = array("d")
        self._f = array("d")
        self._gn = array("d")
        self._delta = array("d")
        self._exp = array("q")
        self._step = array("d")
        self._nv = array("q")
        self._ng = array("q")
        self._mode = array("b")

    def __len__(self) -> int:
        return len(self._f)

    def append(self, x, f_val, grad_norm, delta, exponent, n_value_evals, n_grad_evals, mode):
        self._xs.extend(x)
        self._f.append(f_val)
        self._gn.append(grad_norm)
        self._delta.append(delta)
        self._exp.append(_NO_EXPONENT if exponent is None else exponent)
        self._step.append(delta * grad_norm)
        self._nv.append(n_value_evals)
        self._ng.append(n_grad_evals)
        self._mode.append(_MODE_CODE[mode])

    def last_delta(self) -> tuple[float, Optional[int]]:
        e = self._exp[-1]
        return self._delta[-1], None if e == _NO_EXPONENT else e

    def build(self, termination, final_x, final_f, final_grad_norm, final_value_evals, final_grad_evals):
        def col(buf, dtype):
            return np.frombuffer(buf, dtype=dtype).copy() if len(buf) else np.empty(0, dtype)

        return Trace(
            objective=self.objective,
            scheme=self.scheme,
            x0=self.x0,
            xs=col(self._xs, np.float64).reshape(-1, self.dim),
            f=col(self._f, np.float64),
            grad_norm=col(self._gn, np.float64),
            delta=col(self._delta, np.float64),
            exponent=col(self._exp, np.int64),
            step_norm=col(self._step, np.float64),
            n_value_evals=col(self._nv, np.int64),
            n_grad_evals=col(self._ng, np.int64),
            mode_code=col(self._mode, np.int8),
            termination=termination,
            final_x=np.array(final_x, dtype=np.float64),
            final_f=float(final_f),
            final_grad_norm=float(final_grad_norm),
            final_value_evals=final_value_evals,
            final_grad_evals=final_grad_evals,
        )
