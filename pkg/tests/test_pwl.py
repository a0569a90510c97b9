import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmrelay.pwl import LinearPiece, PwlValue, lower_envelope

finite = st.floats(-10, 10, allow_nan=False)
pieces_st = st.lists(st.tuples(finite, finite), min_size=1, max_size=12)


def test_dominated_constant_removed():
    env = lower_envelope([(1, 0), (2, 0)])
    assert env.pieces == (LinearPiece(1, 0),)


def test_crossing_pieces_both_kept():
    env = lower_envelope([(1, -1), (0.5, 0)])
    assert len(env) == 2
    assert env.breakpoints() == pytest.approx([0.5])
    assert env(0.25) == pytest.approx(0.5)
    assert env(0.75) == pytest.approx(0.25)


def test_empty_input_rejected():
    with pytest.raises(ValueError, match="no pieces"):
        lower_envelope([])


def test_duplicate_slopes_keep_the_lower():
    env = lower_envelope([(3, 1), (2, 1), (5, 1)])
    assert env.pieces == (LinearPiece(2, 1),)


def test_line_winning_only_outside_unit_interval_is_dropped():
    # (0.2, 5) is lowest only for b < -0.02
    env = lower_envelope([(0.2, 5), (0.1, 0)])
    assert env.pieces == (LinearPiece(0.1, 0),)


def test_evaluation_scalar_and_array():
    env = PwlValue((LinearPiece(1.0, -1.0), LinearPiece(0.5, 0.0)))
    b = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(env(b), [0.5, 0.5, 0.0])
    assert isinstance(env(0.3), float)


def test_intervals_partition_unit_interval():
    env = lower_envelope([(1, -1), (0.5, 0), (0.8, -0.5)])
    iv = env.intervals()
    assert iv[0][0] == 0.0 and iv[-1][1] == 1.0
    for (a, b), (c, d) in zip(iv, iv[1:]):
        assert b == pytest.approx(c)


@settings(max_examples=200, deadline=None)
@given(pieces_st)
def test_envelope_matches_brute_minimum(pieces):
    env = lower_envelope(pieces)
    b = np.linspace(0, 1, 501)
    brute = np.min([e + s * b for e, s in pieces], axis=0)
    np.testing.assert_allclose(env(b), brute, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(pieces_st)
def test_every_kept_piece_wins_somewhere(pieces):
    env = lower_envelope(pieces)
    for (lo, hi) in env.intervals():
        assert hi - lo > 1e-12


@settings(max_examples=200, deadline=None)
@given(pieces_st)
def test_envelope_is_concave(pieces):
    env = lower_envelope(pieces)
    b = np.linspace(0, 1, 401)
    v = env(b)
    assert np.all(v[1:-1] - 0.5 * (v[:-2] + v[2:]) >= -1e-9)


@settings(max_examples=100, deadline=None)
@given(pieces_st)
def test_slopes_sorted_decreasing(pieces):
    env = lower_envelope(pieces)
    assert np.all(np.diff(env.beta) < 0)
