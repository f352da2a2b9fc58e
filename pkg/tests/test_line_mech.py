import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msdp.density import check_privacy, expected_min_disutility
from msdp.errors import InvalidK, NonPositiveDerivative, NonPositiveEpsilon
from msdp.line_mech import (closed_form_cost, effective_epsilon, laplace_density, line_summary,
                            median_condition, optimal_offsets_closed, optimal_offsets_recurrence,
                            recurrence_states)

LN2 = math.log(2.0)

# independent scipy quad + Nelder-Mead over symmetric placements, eps = 1
SQRT_K5_COST = 0.5040020474136204
SQRT_K5_POS = (0.6193347991326549, 1.690096232890149)
SQUARE_K4_COST = 0.352389762108085
SQUARE_K4_POS = (0.5936242608346496, 2.5936242470118938)


def test_laplace_density():
    d = laplace_density(1.0)
    assert d.pdf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert check_privacy(d, 1.0).worst_ratio_log == 0.0


@pytest.mark.parametrize("eps,k,expected", [
    (1.0, 3, (-2 * LN2, 0.0, 2 * LN2)),
    (1.0, 2, (-LN2, LN2)),
    (2.0, 1, (0.0,)),
    (1.0, 7, (-2 * math.log(4), -2 * LN2, -2 * math.log(4 / 3), 0.0,
              2 * math.log(4 / 3), 2 * LN2, 2 * math.log(4))),
])
def test_closed_offsets(eps, k, expected):
    assert np.allclose(optimal_offsets_closed(eps, k).offsets, expected, atol=1e-12, rtol=0)


@pytest.mark.parametrize("eps,k,expected", [(1.0, 1, 1.0), (1.0, 3, 0.5), (1.0, 2, LN2), (2.0, 4, math.log(1.5) / 2)])
def test_closed_cost(eps, k, expected):
    assert closed_form_cost(eps, k) == pytest.approx(expected, abs=1e-15)


def test_bad_arguments():
    with pytest.raises(InvalidK):
        optimal_offsets_closed(1.0, 0)
    with pytest.raises(NonPositiveEpsilon):
        closed_form_cost(-1.0, 3)
    with pytest.raises(InvalidK):
        optimal_offsets_recurrence(1.0, 2.5)


def test_recurrence_k3_step():
    state = recurrence_states(1.0, 2)
    assert state.s_gaps[0] == pytest.approx(2 * LN2, abs=1e-12)
    offs, cost = optimal_offsets_recurrence(1.0, 3)
    assert cost == pytest.approx(0.5, abs=1e-14)


def test_recurrence_d_sequence():
    state = recurrence_states(1.0, 3)
    assert np.allclose(state.D, (1.0, 0.5, 1 / 3), atol=1e-14, rtol=0)
    _, cost = optimal_offsets_recurrence(1.0, 5)
    assert cost == pytest.approx(1 / 3, abs=1e-14)


@pytest.mark.parametrize("h,expected", [("identity", 1.0), ("sqrt", math.sqrt(math.pi) / 2), ("square", 2.0)])
def test_recurrence_single_result(h, expected):
    offs, cost = optimal_offsets_recurrence(1.0, 1, h)
    assert list(offs) == [0.0]
    assert cost == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("k", range(1, 16))
def test_recurrence_matches_closed_form(k):
    for eps in (0.5, 1.0, 2.0):
        offs, cost = optimal_offsets_recurrence(eps, k)
        assert np.max(np.abs(offs.as_array() - optimal_offsets_closed(eps, k).as_array())) < 1e-7
        assert cost == pytest.approx(closed_form_cost(eps, k), abs=1e-12)


def test_recurrence_sqrt_matches_independent_search():
    offs, cost = optimal_offsets_recurrence(1.0, 5, "sqrt")
    assert cost == pytest.approx(SQRT_K5_COST, abs=1e-9)
    assert np.allclose(offs.offsets[3:], SQRT_K5_POS, atol=1e-6)
    assert expected_min_disutility(laplace_density(1.0), offs, "sqrt") == pytest.approx(cost, abs=1e-8)


def test_recurrence_square_matches_independent_search():
    offs, cost = optimal_offsets_recurrence(1.0, 4, "square")
    assert cost == pytest.approx(SQUARE_K4_COST, abs=1e-9)
    assert np.allclose(offs.offsets[2:], SQUARE_K4_POS, atol=1e-6)


def test_recurrence_scales_with_eps_for_identity():
    a, ca = optimal_offsets_recurrence(1.0, 6)
    b, cb = optimal_offsets_recurrence(4.0, 6)
    assert np.allclose(a.as_array() / 4.0, b.as_array(), atol=1e-12)
    assert cb == pytest.approx(ca / 4.0, abs=1e-14)


def test_median_condition_examples():
    d = laplace_density(1.0)
    assert median_condition(d, optimal_offsets_closed(1.0, 3)).max_abs_residual < 1e-12
    assert median_condition(d, [0.0]).max_abs_residual < 1e-15
    # mass below 1 minus mass above 1
    assert median_condition(d, [1.0]).residuals[0] == pytest.approx(1 - math.exp(-1), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.05, 20.0), k=st.integers(1, 40))
def test_closed_form_satisfies_median_condition(eps, k):
    d = laplace_density(eps)
    A = optimal_offsets_closed(eps, k)
    assert median_condition(d, A).max_abs_residual < 1e-12


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.05, 20.0), k=st.integers(1, 30))
def test_closed_form_cost_is_exact(eps, k):
    exact = expected_min_disutility(laplace_density(eps), optimal_offsets_closed(eps, k))
    assert exact == pytest.approx(closed_form_cost(eps, k), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(2, 12), eps=st.floats(0.2, 5.0))
def test_cost_decreases_in_k(k, eps):
    assert closed_form_cost(eps, k) < closed_form_cost(eps, k - 1)


@pytest.mark.parametrize("i", range(1, 6))
def test_adjacent_gaps(i):
    # odd k = 2t+1: the i-th positive gap from the outside is 2 log(1 + 1/i)
    t = 5
    pos = [x for x in optimal_offsets_closed(1.0, 2 * t + 1) if x >= 0]
    gaps = np.diff(pos)[::-1]
    assert gaps[i - 1] == pytest.approx(2 * math.log1p(1 / i), abs=1e-12)


def test_effective_epsilon():
    assert effective_epsilon(1.0) == 1.0
    assert effective_epsilon(2.0) == 2.0
    # g(t) = e^t - 1 has slope 1 at zero
    assert effective_epsilon(math.exp(0.0)) == 1.0
    with pytest.raises(NonPositiveDerivative):
        effective_epsilon(0.0)


def test_line_summary():
    res = line_summary(1.0, 7)
    assert res["cost"] == 0.25
    assert res["median_residual_max"] < 1e-12
    res = line_summary(1.0, 3, "sqrt", "recurrence")
    assert res["h"] == "sqrt"
    with pytest.raises(ValueError):
        line_summary(1.0, 3, "sqrt", "closed")
