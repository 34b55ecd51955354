"""Backtracking and unbounded-backtracking gradient descent with run audits."""

from .core import (
    KnownAnalysis,
    LineSearchParams,
    Mode,
    NumericalFailure,
    Objective,
    StepRecord,
    Termination,
    Trace,
    as_vector,
    evaluate,
    norm,
)
from .corpus import CorpusEntry, corpus_list, get_entry, gradient_check, lipschitz_audit
from .diagnostics import TheoremAudit, audit, compare
from .drivers import (
    Backtracking,
    Hybrid,
    RunConfig,
    Standard,
    TwoWay,
    Unbounded,
    run,
    run_backtracking,
    run_hybrid,
    run_standard,
    run_twoway,
    run_unbounded,
)
from .growth import GrowthFunction, h_effective, h_eval
from .linesearch import (
    LineSearchFailure,
    Phase,
    SearchResult,
    armijo_holds,
    backtracking_search,
    growth_search,
    two_way_search,
)

__version__ = "0.1.0"
