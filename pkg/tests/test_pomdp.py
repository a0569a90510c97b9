"""Belief filter, DP backup, thresholds and the failure-run rule.

Frozen reference numbers were computed independently with exact rational
arithmetic (fractions.Fraction) or by solving the one- and two-step
problems by hand; see the comments next to each.
"""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mmrelay.pomdp import (UNBOUNDED, ChannelParams, ConvergenceError, belief_update, dp_backup,
                           failure_fixed_point, failure_run_policy, slot_penalty, solve_finite,
                           stationary_threshold, terminal_value, threshold_of)
from mmrelay.pwl import LinearPiece, PwlValue

REF = ChannelParams(0.9, 0.1, 0.8, 1.0, 10)

prob = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def channels(draw, N=st.integers(2, 12)):
    q = draw(st.floats(0.01, 1.0))
    s = draw(st.floats(0.0, 1.0))
    assume(s < q)
    k = draw(st.floats(0.01, 1.0))
    C = draw(st.floats(0.1, 10.0))
    return ChannelParams(q, s, k, C, draw(N))


# --- parameters --------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(q=0.5, s=0.5), dict(q=0.3, s=0.6), dict(k=1.2),
                                dict(C=0.0), dict(N=1), dict(N=2.5), dict(q=1.1)])
def test_invalid_parameters_rejected(kw):
    with pytest.raises(ValueError):
        ChannelParams(**kw)


def test_zero_ack_probability_is_allowed():
    p = ChannelParams(0.9, 0.1, 0.0, 1.0, 5)
    assert belief_update(1.0, 0, p) == pytest.approx(0.9)   # pure prediction


# --- filter ------------------------------------------------------------------

def test_ack_forces_belief_one():
    assert belief_update(0.3, 1, REF) == 1.0


def test_first_miss_from_certainty():
    # 0.9 * 0.2 / (1 - 0.72) = 9/14
    assert belief_update(1.0, 0, REF) == pytest.approx(9 / 14, abs=1e-15)


def test_absorbing_bad_state():
    p = ChannelParams(0.7, 0.0, 0.6, 1.0, 3)
    assert belief_update(0.0, 0, p) == 0.0


def test_certain_good_with_perfect_ack_has_no_miss():
    p = ChannelParams(1.0, 0.2, 1.0, 1.0, 3)
    assert belief_update(1.0, 0, p) == 0.0


@settings(max_examples=300, deadline=None)
@given(prob, channels())
def test_filter_stays_in_unit_interval(b, p):
    for z in (0, 1):
        assert 0.0 <= belief_update(b, z, p) <= 1.0
    assert belief_update(b, 1, p) == 1.0


@settings(max_examples=300, deadline=None)
@given(prob, prob, channels())
def test_filter_increasing_in_belief(b1, b2, p):
    assume(abs(b1 - b2) > 1e-9)
    assume(p.k < 1.0)           # with k = 1 a miss always means bad
    lo, hi = sorted((b1, b2))
    assert belief_update(lo, 0, p) < belief_update(hi, 0, p)


# --- costs -------------------------------------------------------------------

@pytest.mark.parametrize("b,k,C,expected", [(1, 1, 5, 0), (0, 0.3, 5, 5), (0.5, 0.8, 1, 0.6)])
def test_slot_penalty(b, k, C, expected):
    assert slot_penalty(b, ChannelParams(0.9, 0.1, k, C, 3)) == pytest.approx(expected)


def test_terminal_value():
    J = terminal_value(REF)
    assert len(J) == 1
    assert J(0.0) == 1.0
    assert J(1.0) == pytest.approx(0.2)


def test_backup_of_terminal_matches_collapsed_form():
    p = REF
    A, J = dp_backup(terminal_value(p), p)
    b = np.linspace(0, 1, 1001)
    pred = p.q * b + p.s * (1 - b)
    collapsed = (1 - p.k * b) * p.C + (1 - pred * p.k) * p.C
    np.testing.assert_allclose(A(b), collapsed, atol=1e-14)
    assert A(0.0) == pytest.approx(1.92)
    assert np.all(J(b) <= p.C + 1e-15)


@settings(max_examples=100, deadline=None)
@given(channels())
def test_backup_equals_direct_evaluation(p):
    # A(b) evaluated straight from its definition at sample beliefs
    J1 = dp_backup(terminal_value(p), p)[1]
    A, _ = dp_backup(J1, p)
    for b in np.linspace(0, 1, 21):
        pred = p.q * b + p.s * (1 - b)
        direct = (1 - p.k * b) * p.C + pred * p.k * J1(1.0) + (1 - pred * p.k) * J1(belief_update(b, 0, p))
        assert A(b) == pytest.approx(direct, abs=1e-12)


# --- thresholds --------------------------------------------------------------

def test_threshold_second_to_last_closed_form():
    sol = solve_finite(ChannelParams(0.9, 0.1, 0.8, 1.0, 2))
    # (1 - 0.08) / (0.8 * 1.8) = 23/36
    assert sol.thresholds == pytest.approx((23 / 36, 0.0), abs=1e-12)


def test_threshold_trivial_when_continuing_never_pays():
    sol = solve_finite(ChannelParams(0.5, 0.1, 0.2, 1.0, 2))
    assert sol.thresholds[0] == 1.0


def test_threshold_of_constant_zero_is_zero():
    assert threshold_of(PwlValue((LinearPiece(0.0, 0.0),)), 1.0) == 0.0


def test_threshold_of_exact_crossing():
    A = PwlValue((LinearPiece(2.0, -2.0),))
    assert threshold_of(A, 1.0) == pytest.approx(0.5)


def test_three_slot_thresholds():
    # alpha_0 solves 1.9584 - 1.1328 b = 1 by hand (J_1 = C at Phi(b, 0) there)
    sol = solve_finite(ChannelParams(0.9, 0.1, 0.8, 1.0, 3))
    assert sol.thresholds == pytest.approx((599 / 708, 23 / 36, 0.0), abs=1e-12)
    assert sol.thresholds[0] >= sol.thresholds[1]


def test_reference_thresholds_saturate():
    sol = solve_finite(REF)
    assert sol.thresholds[:7] == (1.0,) * 7
    assert sol.thresholds[-3:] == pytest.approx((599 / 708, 23 / 36, 0.0), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(channels())
def test_solution_structure(p):
    sol = solve_finite(p)
    b = np.linspace(0, 1, 201)
    th = sol.thresholds
    assert th[-1] == 0.0
    assert all(x >= y - 1e-12 for x, y in zip(th, th[1:]))
    for J, J_next in zip(sol.values, sol.values[1:]):
        assert np.all(J(b) >= J_next(b) - 1e-12)
    for J in sol.values:
        v = J(b)
        assert np.all((v >= -1e-12) & (v <= p.C + 1e-12))


@settings(max_examples=60, deadline=None)
@given(channels())
def test_thresholds_do_not_depend_on_cost_scale(p):
    a = solve_finite(p).thresholds
    b = solve_finite(ChannelParams(p.q, p.s, p.k, 3.7 * p.C, p.N)).thresholds
    assert a == pytest.approx(b, abs=1e-9)


# --- stationary threshold and failure runs ----------------------------------

def test_stationary_threshold_reference():
    alpha, iters = stationary_threshold(REF, full_output=True)
    assert alpha == 1.0
    assert iters == 4          # 23/36, 599/708, 1, 1
    assert alpha >= solve_finite(ChannelParams(0.9, 0.1, 0.8, 1.0, 2)).thresholds[0]


def test_stationary_threshold_trivial_case():
    assert stationary_threshold(ChannelParams(0.5, 0.1, 0.2, 1.0, 2)) == 1.0


def test_stationary_threshold_rejects_bad_tol():
    with pytest.raises(ValueError):
        stationary_threshold(REF, tol=0.0)


def test_stationary_threshold_nonconvergence_reports_last_two():
    with pytest.raises(ConvergenceError) as info:
        stationary_threshold(REF, max_iter=1)
    assert info.value.last == pytest.approx(23 / 36)


def test_failure_beliefs_reference():
    pol = failure_run_policy(REF, 0.0)
    # exact: 9/14, 43/178, 261/3406
    assert pol.pi[:3] == pytest.approx((9 / 14, 43 / 178, 261 / 3406), abs=1e-15)
    assert pol.r == UNBOUNDED and pol.unbounded


def test_fixed_point_reference():
    # smaller root of 0.64 b^2 - 0.76 b + 0.02, to 40 digits with mpmath
    assert failure_fixed_point(REF) == pytest.approx(0.026926339149467050055, abs=1e-15)


def test_fixed_point_when_good_is_absorbing():
    assert failure_fixed_point(ChannelParams(1.0, 0.2, 0.5, 1.0, 3)) == 1.0


def test_failure_run_length_reference():
    alpha = stationary_threshold(REF)
    pol = failure_run_policy(REF, alpha)
    assert pol.r == 1 and pol.pi == pytest.approx((9 / 14,))
    assert failure_run_policy(REF, 0.1).r == 3


def test_failure_run_rejects_bad_threshold():
    with pytest.raises(ValueError):
        failure_run_policy(REF, 1.5)


@settings(max_examples=200, deadline=None)
@given(channels(), prob)
def test_failure_run_consistent(p, alpha_bar):
    pol = failure_run_policy(p, alpha_bar)
    pi = np.asarray(pol.pi)
    far = np.abs(pi[:-1] - pol.fixed_point) > 1e-12
    assert np.all(np.diff(pi)[far] < 0)
    if pol.fixed_point > alpha_bar:
        assert pol.unbounded
    if pol.unbounded:
        # the runs only approach the fixed point, so it cannot lie below the threshold
        assert pol.fixed_point >= alpha_bar
        assert np.all(pi > alpha_bar)
    else:
        r = int(pol.r)
        assert pi[r - 1] <= alpha_bar and np.all(pi[:r - 1] > alpha_bar)
        assert len(pi) == r


@settings(max_examples=200, deadline=None)
@given(channels())
def test_fixed_point_solves_filter(p):
    b = failure_fixed_point(p)
    assert 0.0 <= b <= 1.0
    assert belief_update(b, 0, p) == pytest.approx(b, abs=1e-10)
