import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ubgd.core import LineSearchParams, Objective, evaluate, norm
from ubgd.corpus import corpus_list, get_entry
from ubgd.growth import GrowthFunction, h_effective
from ubgd.linesearch import (
    LineSearchFailure,
    Phase,
    armijo_holds,
    armijo_test,
    backtracking_search,
    growth_search,
    two_way_search,
)

DEFAULT = LineSearchParams(alpha=0.5, beta=0.5, delta0=1.0)


def oracle_armijo(entry, x, delta, alpha):
    """Armijo's inequality straight from the raw callables."""
    fun, grad = entry.objective.fun, entry.objective.grad
    g = np.asarray(grad(x))
    return fun(x - delta * g) - fun(x) <= -alpha * delta * float(g @ g)


def oracle_backtracking(entry, x, params, m_max=60):
    for m in range(m_max + 1):
        if oracle_armijo(entry, x, params.delta0 * params.beta**m, params.alpha):
            return m
    return None


# --- armijo_holds ------------------------------------------------------------

def test_quadratic_closed_form_oracle():
    # on f = x^2/2 Armijo is (1 - delta)^2 <= 1 - 2*alpha*delta
    for delta in (0.25, 0.5, 1.0, 1.5, 2.0):
        assert ((1 - delta) ** 2 <= 1 - 2 * 0.5 * delta) == oracle_armijo(
            get_entry("quadratic-1d"), np.array([2.0]), delta, 0.5)


def test_armijo_equality_accepted():
    obj = get_entry("quadratic-1d").objective
    x = np.array([2.0])
    assert armijo_holds(obj, x, 2.0, x.copy(), 1.0, 0.5) is True
    assert obj.counter.value == 1


def test_armijo_fails_for_long_step():
    obj = get_entry("quadratic-1d").objective
    x = np.array([2.0])
    assert armijo_holds(obj, x, 2.0, x.copy(), 2.0, 0.5) is False


@pytest.mark.parametrize("delta", [1e-3, 1.0, 1e6])
def test_armijo_zero_gradient(delta):
    obj = get_entry("saddle").objective
    x = np.zeros(2)
    assert armijo_holds(obj, x, 0.0, np.zeros(2), delta, 0.5)


def test_armijo_overflow_flag():
    obj = Objective("steep", 1, lambda x: 1e150 * x[0] ** 2, lambda x: 2e150 * x)
    x = np.array([1.0])
    holds, overflowed = armijo_test(obj, x, 1e150, obj.grad(x), 1.0, 0.5)
    assert (holds, overflowed) == (False, True)


def test_armijo_rejects_nonpositive_delta():
    obj = get_entry("quadratic-1d").objective
    with pytest.raises(ValueError):
        armijo_holds(obj, np.array([1.0]), 0.5, np.array([1.0]), 0.0, 0.5)


# --- backtracking_search -----------------------------------------------------

def test_backtracking_quadratic():
    res = backtracking_search(get_entry("quadratic-1d").objective, np.array([2.0]), DEFAULT)
    assert (res.delta, res.exponent, res.phase) == (1.0, 0, Phase.UNCHANGED)


def test_backtracking_quartic_matches_brute_force():
    entry = get_entry("quartic-1d")
    x = np.array([1.0])
    # Armijo at 1, 0.5, 0.25 evaluated directly
    assert [oracle_armijo(entry, x, d, 0.5) for d in (1.0, 0.5, 0.25)] == [False, False, True]
    res = backtracking_search(entry.objective, x, DEFAULT)
    assert (res.delta, res.exponent, res.phase) == (0.25, 2, Phase.SHRUNK)
    assert res.n_value_evals == 3


def test_backtracking_counts_evaluation_when_not_given():
    obj = get_entry("quartic-1d").objective
    backtracking_search(obj, np.array([1.0]), DEFAULT)
    assert obj.counter.snapshot() == (4, 1)


def test_backtracking_critical_point_precondition():
    with pytest.raises(ValueError, match="critical"):
        backtracking_search(get_entry("saddle").objective, np.zeros(2), DEFAULT)


def test_backtracking_gives_up():
    # gradient with the wrong sign: every step goes uphill
    obj = Objective("uphill", 1, lambda x: float(x[0]), lambda x: -np.ones(1))
    with pytest.raises(LineSearchFailure):
        backtracking_search(obj, np.array([0.0]), LineSearchParams(max_halvings=30))
    # 31 Armijo trials plus the evaluation at x
    assert obj.counter.value == 32


def test_backtracking_survives_overflow():
    a = 1e150
    obj = Objective("steep", 1, lambda x: a * x[0] ** 2, lambda x: 2 * a * x)
    res = backtracking_search(obj, np.array([1.0]), LineSearchParams(max_halvings=1000))
    assert res.overflowed
    # closed form for f = a x^2 at x = 1: Armijo iff delta <= (1 - alpha) / a
    limit = 0.5 / a
    assert res.delta <= limit * (1 + 1e-9) and res.delta / 0.5 > limit


# --- growth_search -----------------------------------------------------------

def test_growth_defers_to_backtracking_when_delta0_fails():
    obj = get_entry("quartic-1d").objective
    x = np.array([1.0])
    res = growth_search(obj, x, DEFAULT, GrowthFunction.power_law(1.0, 0.5))
    assert res == backtracking_search(get_entry("quartic-1d").objective, x, DEFAULT)
    assert res.delta == 0.25


def test_growth_quartic_blocked_by_cap():
    entry = get_entry("quartic-1d")
    x = np.array([0.1])
    h = GrowthFunction.power_law(1.0, 0.5)
    cap = h_effective(h, 1e-3, 1.0)
    # oracle: Armijo holds on the whole ladder up to 32, the cap (~31.6) stops 32
    assert all(oracle_armijo(entry, x, d, 0.5) for d in (1, 2, 4, 8, 16, 32))
    assert 16 <= cap < 32
    res = growth_search(entry.objective, x, DEFAULT, h)
    assert (res.delta, res.exponent, res.phase) == (16.0, -4, Phase.GREW)
    assert res.n_value_evals == 5


def test_growth_blocked_immediately_by_constant_cap():
    res = growth_search(get_entry("quadratic-1d").objective, np.array([2.0]), DEFAULT,
                        GrowthFunction.constant(1.0))
    assert (res.delta, res.exponent, res.phase, res.n_value_evals) == (1.0, 0, Phase.UNCHANGED, 1)


def test_growth_stops_when_armijo_fails():
    entry = get_entry("quartic-1d")
    x = np.array([0.5])
    h = GrowthFunction.constant(1e6)
    expected = max(m for m in range(0, 20) if all(
        oracle_armijo(entry, x, 2.0**k, 0.5) for k in range(m + 1)))
    res = growth_search(entry.objective, x, DEFAULT, h)
    assert res.delta == 2.0**expected and not oracle_armijo(entry, x, 2.0 * res.delta, 0.5)


def test_growth_linear_bounded_by_max_halvings():
    # Armijo holds for any step on a linear function; a huge cap leaves only the iteration bound
    h = GrowthFunction.constant(1e300)
    res = growth_search(get_entry("linear").objective, np.array([0.0]),
                        LineSearchParams(max_halvings=10), h)
    assert (res.exponent, res.delta) == (-10, 1024.0)


# --- two_way_search ----------------------------------------------------------

def test_two_way_grows_to_delta0():
    res = two_way_search(get_entry("quadratic-1d").objective, np.array([2.0]), 0.25, DEFAULT)
    assert (res.delta, res.exponent, res.phase) == (1.0, 0, Phase.GREW)


def test_two_way_keeps_previous():
    entry = get_entry("quartic-1d")
    x = np.array([1.0])
    assert oracle_armijo(entry, x, 0.25, 0.5) and not oracle_armijo(entry, x, 0.5, 0.5)
    res = two_way_search(entry.objective, x, 0.25, DEFAULT)
    assert (res.delta, res.exponent, res.phase, res.n_value_evals) == (0.25, 2, Phase.UNCHANGED, 2)


def test_two_way_at_cap_unchanged():
    res = two_way_search(get_entry("quadratic-1d").objective, np.array([2.0]), 1.0, DEFAULT)
    assert (res.delta, res.phase, res.n_value_evals) == (1.0, Phase.UNCHANGED, 1)


def test_two_way_shrinks():
    res = two_way_search(get_entry("quartic-1d").objective, np.array([1.0]), 1.0, DEFAULT)
    assert (res.delta, res.phase) == (0.25, Phase.SHRUNK)


@pytest.mark.parametrize("bad", [5.0, 0.0, -1.0, math.inf])
def test_two_way_clamps_out_of_range(bad, caplog):
    with caplog.at_level(logging.WARNING, logger="ubgd.linesearch"):
        res = two_way_search(get_entry("quadratic-1d").objective, np.array([2.0]), bad, DEFAULT)
    assert res.delta == 1.0 and res.phase is Phase.UNCHANGED
    assert "clamping" in caplog.text


def test_two_way_off_grid_rounds_down():
    # 0.3 lies between 0.25 and 0.5; Armijo holds at 0.25 but not at 0.5 for quartic at x=1
    res = two_way_search(get_entry("quartic-1d").objective, np.array([1.0]), 0.3, DEFAULT)
    assert (res.delta, res.exponent) == (0.25, 2)


# --- properties ---------------------------------------------------------------

ENTRIES = {e.name: e for e in corpus_list()}

search_case = st.tuples(
    st.sampled_from(sorted(ENTRIES)),
    st.lists(st.floats(0, 1), min_size=10, max_size=10),
    st.floats(0.05, 0.5),
    st.floats(0.1, 0.9),
    st.floats(0.1, 10.0),
)


def _setup(case):
    name, u, alpha, beta, delta0 = case
    entry = ENTRIES[name]
    lo = np.array([a for a, _ in entry.test_box])
    hi = np.array([b for _, b in entry.test_box])
    x = lo + (hi - lo) * np.array(u[: entry.dim])
    params = LineSearchParams(alpha=alpha, beta=beta, delta0=delta0)
    obj = entry.objective.fresh()
    fx, g = evaluate(obj, x)
    return entry, obj, x, fx, g, params


@settings(max_examples=300, deadline=None)
@given(search_case)
def test_search_results_are_armijo_and_on_grid(case):
    entry, obj, x, fx, g, params = _setup(case)
    if norm(g) < params.grad_tol:
        return
    h = GrowthFunction.power_law(params.delta0, 0.5)
    prev = params.grid_value(3)
    for res in (backtracking_search(obj, x, params, fx=fx, g=g),
                growth_search(obj, x, params, h, fx=fx, g=g),
                two_way_search(obj, x, prev, params, fx=fx, g=g)):
        assert armijo_holds(obj, x, fx, g, res.delta, params.alpha)
        assert res.delta == params.grid_value(res.exponent)
        assert math.isclose(res.delta, params.beta**res.exponent * params.delta0, rel_tol=1e-12)


@settings(max_examples=300, deadline=None)
@given(search_case)
def test_search_maximality(case):
    entry, obj, x, fx, g, params = _setup(case)
    if norm(g) < params.grad_tol:
        return
    res = backtracking_search(obj, x, params, fx=fx, g=g)
    if res.exponent >= 1:
        assert not armijo_holds(obj, x, fx, g, res.delta / params.beta, params.alpha)
    h = GrowthFunction.power_law(params.delta0, 0.5)
    grown = growth_search(obj, x, params, h, fx=fx, g=g)
    assert grown.delta >= res.delta
    assert grown.delta <= max(res.delta, h_effective(h, norm(g), params.delta0))
    if grown.phase is Phase.GREW:
        bigger = params.grid_value(grown.exponent - 1)
        assert (bigger > h_effective(h, norm(g), params.delta0)
                or not armijo_holds(obj, x, fx, g, bigger, params.alpha))
    tw = two_way_search(obj, x, params.grid_value(4), params, fx=fx, g=g)
    assert tw.delta <= params.delta0


@settings(max_examples=300, deadline=None)
@given(search_case)
def test_lipschitz_lower_bound(case):
    entry, obj, x, fx, g, params = _setup(case)
    gn = norm(g)
    if gn < params.grad_tol:
        return
    r, L = obj.metadata.local_lipschitz(x)
    bound = min(params.beta / L, params.beta * r / gn, params.delta0)
    assert backtracking_search(obj, x, params, fx=fx, g=g).delta >= bound - 1e-12
    assert two_way_search(obj, x, params.grid_value(7), params, fx=fx, g=g).delta >= bound - 1e-12
