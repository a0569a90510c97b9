import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mmrelay.policies import (CONTINUE, EXPLORE, AgentState, LinkSnapshot, LinkTable, NoPathError,
                              PolicyKind, baseline_metric, bs_global_assign, explore_select,
                              local_decide, on_ack, policy_solution)
from mmrelay.pomdp import ChannelParams, belief_update, failure_run_policy, solve_finite, stationary_threshold
from mmrelay.radio import RadioParams
from mmrelay.world import GridWorld, WorldConfig, build_world

REF = ChannelParams(0.9, 0.1, 0.8, 1.0, 10)
QUIET = RadioParams(shadow_sigma=0.0)


def world_with(static=(), dynamic=(), source=(0, 0), dest=(9, 9)):
    cfg = WorldConfig(static_count=len(static), dynamic_count=len(dynamic), source=source, dest=dest)
    return GridWorld(cfg, frozenset(static), np.array(dynamic, dtype=np.int64),
                     cfg.index(source), cfg.index(dest))


def fresh_snapshot(world, radio=QUIET):
    links = LinkTable(world, radio)
    return links.snapshot(world, radio, np.ones(len(links)), np.zeros(len(links)))


def agent(kind, relay=5, N=10, zone=0):
    p = ChannelParams(0.9, 0.1, 0.8, 1.0, N)
    return AgentState(zone, relay, kind, policy_solution(kind, p))


# --- BS assignment -----------------------------------------------------------

def test_direct_hop_when_destination_is_the_only_choice():
    # zone (8, 9) has index 98; its only strictly closer neighbour is the destination
    w = world_with(source=(8, 9))
    chain = bs_global_assign(w, fresh_snapshot(w), PolicyKind.RSS_BASELINE)
    assert chain == [98, 99]


def test_chain_reaches_destination_and_always_gets_closer():
    w = build_world(WorldConfig(), 2)
    for kind in PolicyKind:
        chain = bs_global_assign(w, fresh_snapshot(w), kind)
        assert chain[0] == w.source and chain[-1] == w.dest
        d = [w.distance(c, w.dest) for c in chain]
        assert all(a > b for a, b in zip(d, d[1:]))


def test_all_candidates_statically_blocked():
    # wall off the source corner
    w = world_with(static=[1, 2, 10, 11, 12, 20, 21, 22])
    with pytest.raises(NoPathError):
        bs_global_assign(w, fresh_snapshot(w), PolicyKind.THROUGHPUT_BASELINE)


def test_assignment_is_deterministic():
    w = build_world(WorldConfig(dynamic_count=20), 8)
    links = LinkTable(w, RadioParams())
    g = np.random.default_rng(1)
    snap = links.snapshot(w, RadioParams(), g.random(len(links)), g.normal(0, 3.5, len(links)))
    assert bs_global_assign(w, snap, PolicyKind.RSS_BASELINE) == bs_global_assign(w, snap, PolicyKind.RSS_BASELINE)


def test_rss_prefers_nearest_relay():
    w = world_with()
    chain = bs_global_assign(w, fresh_snapshot(w), PolicyKind.RSS_BASELINE)
    assert chain[1] in (1, 10)          # an orthogonal neighbour, 10 m away


def test_stale_blocked_link_avoided():
    w = world_with()
    snap = fresh_snapshot(w)
    for j in (1, 10):
        snap.blocked[(0, j)] = True
        snap.rx_dbm[(0, j)] = -math.inf
        snap.capacity[(0, j)] = 0.0
    chain = bs_global_assign(w, snap, PolicyKind.RSS_BASELINE)
    assert chain[1] == 11


# --- metric ------------------------------------------------------------------

def _snap(rx, cap, blocked=False):
    s = LinkSnapshot()
    s.blocked[(0, 1)], s.rx_dbm[(0, 1)], s.capacity[(0, 1)] = blocked, rx, cap
    return s


def test_rss_metric_orders_by_power():
    assert baseline_metric(PolicyKind.RSS_BASELINE, (0, 1), _snap(-50, 1e8)) > \
        baseline_metric(PolicyKind.RSS_BASELINE, (0, 1), _snap(-60, 1e8))


def test_throughput_metric_is_bottleneck():
    assert baseline_metric(PolicyKind.THROUGHPUT_BASELINE, (0, 1), _snap(-50, 1e12), 2e8) == 2e8
    assert baseline_metric(PolicyKind.THROUGHPUT_BASELINE, (0, 1), _snap(-50, 1e8), 2e8) == 1e8


def test_blocked_metric_is_minus_infinity():
    for kind in (PolicyKind.RSS_BASELINE, PolicyKind.THROUGHPUT_BASELINE):
        assert baseline_metric(kind, (0, 1), _snap(-50, 1e8, blocked=True)) == -math.inf


def test_metric_only_for_baselines():
    with pytest.raises(ValueError):
        baseline_metric(PolicyKind.POMDP_FINITE, (0, 1), _snap(-50, 1e8))


def test_pomdp_starts_on_throughput_chain():
    assert PolicyKind.POMDP_FINITE.bs_metric is PolicyKind.THROUGHPUT_BASELINE
    assert PolicyKind.RSS_BASELINE.bs_metric is PolicyKind.RSS_BASELINE


# --- local decisions ---------------------------------------------------------

def test_belief_one_continues():
    a = agent(PolicyKind.POMDP_FINITE)
    for l in range(10):
        a.slot_index = l
        assert local_decide(a) == CONTINUE


def test_low_belief_explores():
    a = agent(PolicyKind.POMDP_FINITE)
    a.belief, a.slot_index = 0.5, 8           # alpha_8 = 23/36
    assert local_decide(a) == EXPLORE


def test_last_slot_always_continues():
    a = agent(PolicyKind.POMDP_FINITE)
    a.belief, a.slot_index = 0.0, 9
    assert local_decide(a) == CONTINUE


def test_failure_run_reaches_r():
    a = agent(PolicyKind.POMDP_STATIONARY)
    assert a.solution.r == 1
    on_ack(a, 0, REF)
    assert local_decide(a) == EXPLORE


def test_baselines_never_explore():
    for kind in (PolicyKind.RSS_BASELINE, PolicyKind.THROUGHPUT_BASELINE):
        a = agent(kind)
        for _ in range(5):
            on_ack(a, 0, REF)
            assert local_decide(a) == CONTINUE


def test_on_ack_updates():
    a = agent(PolicyKind.POMDP_FINITE)
    a.belief = 0.5
    on_ack(a, 1, REF)
    assert (a.belief, a.consecutive_failures, a.slot_index) == (1.0, 0, 1)
    on_ack(a, 0, REF)
    assert a.belief == pytest.approx(9 / 14) and a.consecutive_failures == 1
    on_ack(a, 0, REF)
    on_ack(a, 0, REF)
    assert a.consecutive_failures == 3
    assert a.belief == pytest.approx(261 / 3406)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=30))
def test_belief_is_fold_of_acks(zs):
    a = agent(PolicyKind.POMDP_FINITE)
    for z in zs:
        on_ack(a, z, REF)
    assert a.belief == reduce(lambda b, z: belief_update(b, z, REF), zs, 1.0)
    run = len(zs) - max([i + 1 for i, z in enumerate(zs) if z] or [0])
    assert a.consecutive_failures == run


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=20), st.lists(st.integers(0, 1), max_size=20), st.integers(0, 8))
def test_stationary_rule_depends_only_on_failure_run(h1, h2, tail):
    a, b = agent(PolicyKind.POMDP_STATIONARY), agent(PolicyKind.POMDP_STATIONARY)
    for z in h1 + [1] + [0] * tail:
        on_ack(a, z, REF)
    for z in h2 + [1] + [0] * tail:
        on_ack(b, z, REF)
    assert local_decide(a) == local_decide(b)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.99), st.floats(0.0, 1.0), st.floats(0.3, 0.99), st.lists(st.integers(0, 1), max_size=25))
def test_finite_and_stationary_agree_far_from_the_end(q, s_frac, k, zs):
    p = ChannelParams(q, q * s_frac * 0.999, k, 1.0, 80)
    alpha_bar = stationary_threshold(p)
    pol = failure_run_policy(p, alpha_bar)
    assume(all(abs(v - alpha_bar) > 1e-9 for v in pol.pi))
    sol = solve_finite(p)
    settled = [l for l, a in enumerate(sol.thresholds[:-1]) if abs(a - alpha_bar) < 1e-12]
    assume(settled)
    fin = AgentState(0, 1, PolicyKind.POMDP_FINITE, sol)
    sta = AgentState(0, 1, PolicyKind.POMDP_STATIONARY, pol)
    for z in zs:
        on_ack(fin, z, p)
        on_ack(sta, z, p)
        fin.slot_index = settled[0]
        assert local_decide(fin) == local_decide(sta)


# --- exploring ---------------------------------------------------------------

def test_explore_single_unblocked_candidate():
    # zone 89 is (9, 8): the destination is the only strictly closer cell
    w = world_with(source=(8, 9))
    a = AgentState(89, None, PolicyKind.POMDP_FINITE, None, belief=0.2, consecutive_failures=3)
    assert explore_select(a, w, QUIET, np.random.default_rng(0)) == 99
    assert (a.current_relay, a.belief, a.consecutive_failures) == (99, 1.0, 0)


def test_explore_all_blocked_keeps_relay():
    w = world_with(dynamic=[1, 10, 11, 12, 21, 2, 20, 22] * 6)
    a = AgentState(0, 1, PolicyKind.POMDP_FINITE, None, belief=0.2)
    new = explore_select(a, w, QUIET, np.random.default_rng(0), coin=lambda i, j: 0.0)
    assert new == 1 and a.belief == 0.2


def test_explore_empty_candidate_set_keeps_relay():
    w = world_with()
    a = AgentState(99, 98, PolicyKind.POMDP_FINITE, None)
    assert explore_select(a, w, QUIET, np.random.default_rng(0)) == 98


def test_explore_tie_goes_to_lower_index():
    # 1 and 10 are both 10 m from zone 0; with no shadowing their RSS is equal
    w = world_with()
    a = AgentState(0, 11, PolicyKind.POMDP_FINITE, None)
    assert explore_select(a, w, QUIET, np.random.default_rng(0)) == 1


def test_explore_prior_override():
    w = world_with()
    a = AgentState(0, 11, PolicyKind.POMDP_FINITE, None, belief=0.1)
    explore_select(a, w, QUIET, np.random.default_rng(0), prior=0.7)
    assert a.belief == 0.7


# --- link table --------------------------------------------------------------

def test_link_table_counts_obstacles_on_segments():
    w = world_with(dynamic=[1, 1, 55])
    links = LinkTable(w, QUIET)
    n = links.obstacle_counts(w)
    assert n[links.row[(0, 2)]] == 2
    assert n[links.row[(0, 10)]] == 0
    assert all(n[links.row[p]] == w.obstacles_on(*p) for p in links.pairs)
