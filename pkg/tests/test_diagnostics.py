import math

import numpy as np
import pytest

from ubgd.core import LineSearchParams, Mode, Termination
from ubgd.corpus import corpus_list, get_entry
from ubgd.diagnostics import (
    armijo_violations,
    audit,
    compare,
    decile_means,
    distance_below,
    hybrid_window_ok,
    norm_below,
    step_norm_witness,
    tail_fraction,
)
from ubgd.drivers import Backtracking, Hybrid, RunConfig, Standard, TwoWay, Unbounded, run


def _run(name, scheme, x0, **kw):
    entry = get_entry(name)
    cfg = RunConfig(scheme, x0, **kw)
    return run(entry.objective, cfg), entry.objective, cfg


def test_audit_quadratic_one_step():
    tr, obj, cfg = _run("quadratic-1d", Backtracking(), [2.0])
    a = audit(tr, obj, cfg)
    assert a.armijo_ok and a.descent_ok
    assert a.final_grad_norm == 0.0
    point, dist = a.nearest_known_critical
    assert point.tolist() == [0.0] and dist == 0.0
    assert a.delta_lower_bound_ok is True and a.hybrid_window_ok is None
    assert a.termination is Termination.CRITICAL_POINT and a.n_steps == 1


def test_audit_linear_divergence():
    tr, obj, cfg = _run("linear", Backtracking(), [0.0], divergence_x_threshold=1e4)
    a = audit(tr, obj, cfg)
    assert a.termination in (Termination.DIVERGING_X, Termination.DIVERGING_F)
    assert np.all(tr.step_norm == 1.0)
    assert a.step_norm_trend == (1.0, 1.0)
    assert a.nearest_known_critical is None
    assert step_norm_witness(tr) is None


def test_audit_zero_step_trace_is_vacuous():
    tr, obj, cfg = _run("rosenbrock", Hybrid(3), [1.0, 1.0])
    a = audit(tr, obj, cfg)
    assert tr.n_steps == 0
    assert a.armijo_ok and a.descent_ok and a.delta_lower_bound_ok and a.hybrid_window_ok
    assert a.partial_sum_tail_fraction == 0.0


def test_audit_is_pure():
    tr, obj, cfg = _run("quartic-2d", Unbounded(), [1.0, -0.5], max_iters=400)
    before = obj.counter.snapshot()
    assert audit(tr, obj, cfg) == audit(tr, obj, cfg)
    assert obj.counter.snapshot() == before


def test_audit_dict_is_json_ready():
    import json

    tr, obj, cfg = _run("double-well", TwoWay(), [1.7])
    d = audit(tr, obj, cfg).to_dict()
    assert json.loads(json.dumps(d)) == d
    assert d["termination"] == "CriticalPoint"


def test_standard_steps_are_not_armijo_audited():
    # |1 - 2.1| > 1: every step goes uphill, yet nothing is flagged
    tr, obj, cfg = _run("quadratic-1d", Standard(2.1), [1.0], max_iters=5)
    assert armijo_violations(tr, 0.5).size == 0
    a = audit(tr, obj, cfg)
    assert a.armijo_ok and not a.descent_ok


def test_armijo_violation_detected():
    tr, _, _ = _run("quadratic-1d", Standard(1.5), [1.0], max_iters=3)
    tr.mode_code[:] = list(Mode).index(Mode.BACKTRACK)
    # (1 - 1.5)^2 = 0.25 > 1 - 1.5 = -0.5: every step misses the bound
    assert armijo_violations(tr, 0.5).tolist() == [0, 1, 2]


def test_window_check():
    tr, _, _ = _run("quartic-1d", Hybrid(3), [1.0], max_iters=100)
    assert hybrid_window_ok(tr, 3)
    tr.mode_code[:] = list(Mode).index(Mode.REUSE)
    assert not hybrid_window_ok(tr, 3)


def test_decile_means_and_tail():
    assert decile_means(np.arange(100.0)) == (4.5, 94.5)
    assert decile_means(np.array([3.0])) == (3.0, 3.0)
    assert decile_means(np.empty(0)) == (0.0, 0.0)
    tr, _, _ = _run("quadratic-1d", Backtracking(), [2.0])
    assert tail_fraction(tr) == 1.0


def test_converged_runs_land_on_known_critical_points():
    rng = np.random.default_rng(99)
    for entry in corpus_list():
        for scheme in (Backtracking(), Unbounded(), TwoWay()):
            cfg = RunConfig(scheme, entry.sample(rng), max_iters=3000)
            tr = run(entry.objective.fresh(), cfg)
            if tr.termination is not Termination.CRITICAL_POINT:
                continue
            a = audit(tr, entry.objective, cfg)
            assert a.final_grad_norm < cfg.params.grad_tol
            if "flat-gradient" in entry.scenario_tags and entry.name.startswith("quartic"):
                # |grad| = |x|^3 per coordinate, so the stop radius is grad_tol**(1/3) ~ 4.6e-4
                assert a.nearest_known_critical[1] < np.sqrt(entry.dim) * cfg.params.grad_tol ** (1 / 3)
            else:
                assert a.nearest_known_critical[1] < 1e-4


def test_step_norms_shrink_on_long_runs():
    rng = np.random.default_rng(5)
    for name in ("quartic-1d", "rosenbrock", "cubic", "double-well"):
        entry = get_entry(name)
        for scheme in (Backtracking(), Unbounded(), TwoWay(), Hybrid(3)):
            tr = run(entry.objective.fresh(), RunConfig(scheme, entry.sample(rng), max_iters=3000))
            if tr.n_steps >= 50 and tr.termination in (Termination.CRITICAL_POINT,
                                                      Termination.MAX_ITERS):
                first, last = decile_means(tr.step_norm)
                assert last < first


# --- compare -------------------------------------------------------------------

def _traces(name, schemes, x0, **kw):
    return [(s.name, run(get_entry(name).objective, RunConfig(s, x0, **kw))) for s in schemes]


def test_compare_quadratic_ties():
    rows = compare(_traces("quadratic-1d", [Backtracking(), Unbounded(), TwoWay(), Hybrid(5)], [2.0]),
                   norm_below(1e-8))
    assert [r.iters_to_target for r in rows] == [1, 1, 1, 1]


def test_compare_divergent_is_infinite():
    rows = compare(_traces("quadratic-1d", [Standard(2.5), Backtracking()], [1.0]), norm_below(1e-8))
    assert math.isinf(rows[0].iters_to_target) and rows[1].iters_to_target == 1
    assert rows[0].termination is Termination.DIVERGING_X


def test_compare_quartic_speedup():
    rows = compare(_traces("quartic-1d", [Backtracking(), Unbounded()], [1.0], max_iters=20000),
                   norm_below(1e-3))
    # backtracking needs far longer than this budget; unbounded gets there quickly
    assert math.isinf(rows[0].iters_to_target)
    assert rows[1].iters_to_target == 85


def test_compare_counts_evals():
    (name, tr), = _traces("rosenbrock", [Backtracking()], [-1.2, 1.0], max_iters=50)
    row, = compare([(name, tr)], distance_below([1.0, 1.0], 1e-3))
    assert (row.value_evals, row.grad_evals) == (tr.total_value_evals, tr.total_grad_evals)
    assert row.grad_evals == 51


def test_compare_rejects_mismatch():
    a = _traces("quadratic-1d", [Backtracking()], [2.0])
    b = _traces("quadratic-1d", [Backtracking()], [3.0])
    c = _traces("linear", [Backtracking()], [2.0], max_iters=3)
    with pytest.raises(ValueError):
        compare(a + b, norm_below(1.0))
    with pytest.raises(ValueError):
        compare(a + c, norm_below(1.0))
    assert compare([], norm_below(1.0)) == []


def test_quartic_unbounded_steps_vanish_with_tighter_tolerance():
    # with the default grad_tol the capped final steps stay near beta*delta0*sqrt(1e-10);
    # stopping later lets the last-decile mean fall below 1e-6
    entry = get_entry("quartic-1d")
    params = LineSearchParams(grad_tol=1e-12)
    for x0 in entry.sample(np.random.default_rng(12345), 5):
        tr = run(entry.objective.fresh(), RunConfig(Unbounded(), x0, params, max_iters=2000))
        assert tr.termination is Termination.CRITICAL_POINT and tr.n_steps >= 50
        assert step_norm_witness(tr) is True
