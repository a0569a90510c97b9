"""Frame-structured slot loop for one source-destination flow.

Each frame the BS builds a relay chain from link states it saw at the end of
the previous frame. Within the frame one packet is in flight at a time; every
slot the zone holding it either transmits over its relay, spends the slot
exploring for a better relay, or stalls. A delivered packet is immediately
replaced at the source; whatever is still in flight when the frame ends is
abandoned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .policies import (CONTINUE, EXPLORE, AgentState, LinkTable, NoPathError, PolicyKind,
                       bs_global_assign, explore_select, local_decide, on_ack, policy_solution)
from .pomdp import ChannelParams, DpSolution, solve_finite
from .radio import RadioParams, capacity_from_rx, rx_power_dbm
from .world import (GridWorld, WorldConfig, blocked_from_draw, build_world, step_dynamic_obstacles,
                    write_obstacle_trace)


@dataclass(frozen=True)
class SimConfig:
    slot: float = 0.1                 # s
    slots_per_frame: int = 50
    frames: int = 2
    packet_bytes: int = 65535
    static_count: int = 16
    dynamic_count: int = 0
    policy: PolicyKind = PolicyKind.POMDP_FINITE
    q: float = 0.9
    s: float = 0.1
    k: float = 0.8
    C: float = 1.0
    radio: RadioParams = field(default_factory=RadioParams)
    seed: int = 0
    blockage_gating: str = "geometric"
    source: tuple[int, int] = (0, 0)
    dest: tuple[int, int] = (9, 9)
    switch_belief: float = 1.0
    blockage_hold: int = 1            # slots between obstacle moves / blockage redraws

    def __post_init__(self):
        if not self.slot > 0:
            raise ValueError("slot must be positive")
        if self.frames < 1 or self.packet_bytes < 1:
            raise ValueError("frames and packet_bytes must be positive")
        if not 0 <= self.static_count <= 16:
            raise ValueError("static_count must be in [0, 16]")
        if self.dynamic_count < 0:
            raise ValueError("dynamic_count must be non-negative")
        if self.blockage_hold < 1:
            raise ValueError("blockage_hold must be at least 1")
        if not 0.0 <= self.switch_belief <= 1.0:
            raise ValueError("switch_belief must lie in [0, 1]")
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        self.channel  # validates q, s, k, C, N
        self.world    # validates grid endpoints and gating

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.q, self.s, self.k, self.C, self.slots_per_frame)

    @property
    def world(self) -> WorldConfig:
        return WorldConfig(static_count=self.static_count, dynamic_count=self.dynamic_count,
                           source=tuple(self.source), dest=tuple(self.dest),
                           blockage_gating=self.blockage_gating)


@dataclass
class EpisodeStats:
    packets_delivered: int = 0
    packets_lost: int = 0
    packets_abandoned: int = 0
    transmit_slots: int = 0
    exploration_slots: int = 0
    stalled_slots: int = 0
    total_delay: float = 0.0          # s, all flow time attributed to hops
    latency_sum: float = 0.0          # s, first transmission to arrival, delivered packets only
    hops_traversed: int = 0           # summed path length of delivered packets
    per_hop_lost: list = field(default_factory=list)
    per_hop_transmit: list = field(default_factory=list)
    per_hop_exploration: list = field(default_factory=list)
    per_hop_stalled: list = field(default_factory=list)
    per_hop_delay: list = field(default_factory=list)

    def _bump(self, name: str, hop: int, amount=1):
        arr = getattr(self, name)
        while len(arr) <= hop:
            arr.append(0)
        arr[hop] += amount

    @property
    def slots(self) -> int:
        return self.transmit_slots + self.exploration_slots + self.stalled_slots

    @property
    def mean_hops(self) -> float:
        return self.hops_traversed / self.packets_delivered if self.packets_delivered else 0.0

    @property
    def loss_per_delivered(self) -> float:
        return self.packets_lost / max(self.packets_delivered, 1)

    @property
    def e2e_delay_per_packet(self) -> float:
        """Flow time spent per delivered packet, s."""
        return self.total_delay / max(self.packets_delivered, 1)

    @property
    def loss_per_delivered_per_hop(self) -> float:
        return self.loss_per_delivered / max(self.mean_hops, 1.0)

    @property
    def e2e_delay_per_packet_per_hop(self) -> float:
        return self.e2e_delay_per_packet / max(self.mean_hops, 1.0)

    def metrics(self) -> dict:
        return {
            "packets_delivered": self.packets_delivered,
            "packets_lost": self.packets_lost,
            "exploration_slots": self.exploration_slots,
            "stalled_slots": self.stalled_slots,
            "total_delay_s": self.total_delay,
            "hops": self.hops_traversed,
            "loss_per_delivered": self.loss_per_delivered,
            "e2e_delay_per_packet_s": self.e2e_delay_per_packet,
            "loss_per_delivered_per_hop": self.loss_per_delivered_per_hop,
            "e2e_delay_per_packet_per_hop_s": self.e2e_delay_per_packet_per_hop,
        }


@dataclass(frozen=True)
class SlotEvent:
    frame: int
    slot: int
    hop: int
    action: str          # transmit | explore | stall
    x: int | None
    z: int | None
    belief_before: float | None
    belief_after: float | None

    def csv(self) -> str:
        def fmt(v):
            return "" if v is None else (repr(v) if isinstance(v, float) else str(v))
        return ",".join(fmt(getattr(self, f.name)) for f in fields(self))


def ack_draw(x: bool, k: float, rng: np.random.Generator | None = None, u: float | None = None) -> int:
    """ACK for one transmission: never on a bad link, w.p. ``k`` on a good one."""
    if not x:
        return 0
    if u is None:
        u = rng.random()
    return int(u < k)


def run_episode(cfg: SimConfig, trace=None, obstacle_trace=None) -> EpisodeStats:
    """Simulate ``cfg.frames`` frames; deterministic in ``cfg.seed``.

    ``trace`` / ``obstacle_trace`` are optional text sinks for per-slot
    :class:`SlotEvent` lines and obstacle positions.
    """
    N = cfg.slots_per_frame
    T = N * cfg.frames
    channel = cfg.channel
    radio = cfg.radio
    kind = cfg.policy
    solution = policy_solution(kind, channel)
    need_bits = 8.0 * cfg.packet_bytes
    seed = cfg.seed

    world = build_world(cfg.world, seed)
    links = LinkTable(world, radio)
    D = len(world.dynamic)
    moves = np.array([rngmod.substream(seed, rngmod.OBSTACLE_MOVES, m).random(T) for m in range(D)]) \
        if D else np.zeros((0, T))
    hold = cfg.blockage_hold
    # one blockage uniform per link, redrawn every `hold` slots
    block_u = rngmod.substream(seed, rngmod.BLOCKAGE).random((-(-T // hold), len(links)))

    def coins(t):
        return block_u[t // hold]

    shadow = rngmod.substream(seed, rngmod.SHADOWING).normal(0.0, radio.shadow_sigma, T).tolist()
    ack_u = rngmod.substream(seed, rngmod.ACKS).random(T).tolist()
    snap_rng = rngmod.substream(seed, rngmod.SNAPSHOT)
    explore_rng = rngmod.substream(seed, rngmod.EXPLORE)
    prior = cfg.switch_belief

    stats = EpisodeStats()
    snap = links.snapshot(world, radio, coins(0),
                          snap_rng.normal(0.0, radio.shadow_sigma, len(links)))
    row = links.row
    delay_unit = cfg.slot

    def route_from(node, next_hop):
        try:
            chain = bs_global_assign(world, snap, kind, start=node)
        except NoPathError:
            return False
        for a, b in zip(chain, chain[1:]):
            next_hop[a] = b
        return True

    for frame in range(cfg.frames):
        next_hop: dict = {}
        stalled = not route_from(world.source, next_hop)
        agents: dict = {}
        holder, hops, t_first = world.source, 0, None

        for l in range(N):
            t = frame * N + l
            if obstacle_trace is not None:
                write_obstacle_trace(obstacle_trace, t, world)
            if stalled:
                stats.stalled_slots += 1
                stats._bump("per_hop_stalled", 0)
                stats._bump("per_hop_delay", 0)
                if trace is not None:
                    trace.write(SlotEvent(frame, l, 0, "stall", None, None, None, None).csv() + "\n")
            else:
                h0 = hops
                agent = agents.get(holder)
                if agent is None:
                    agent = AgentState(holder, next_hop.get(holder), kind, solution)
                    agents[holder] = agent
                agent.slot_index = l
                if agent.current_relay is None and not kind.is_pomdp:
                    decision = "stall"
                elif agent.current_relay is None:
                    decision = EXPLORE
                else:
                    decision = local_decide(agent)

                if decision == EXPLORE:
                    before = agent.belief
                    old = agent.current_relay
                    u_now = coins(t)
                    new = explore_select(agent, world, radio, explore_rng, prior,
                                         coin=lambda i, j: u_now[row[(i, j)]])
                    if new is not None and new != old:
                        next_hop[holder] = new
                        if new != world.dest:
                            route_from(new, next_hop) or next_hop.pop(new, None)
                    stats.exploration_slots += 1
                    stats._bump("per_hop_exploration", hops)
                    if trace is not None:
                        trace.write(SlotEvent(frame, l, hops, "explore", None, None, before,
                                              agent.belief).csv() + "\n")
                elif decision == "stall":
                    stats.stalled_slots += 1
                    stats._bump("per_hop_stalled", hops)
                    if trace is not None:
                        trace.write(SlotEvent(frame, l, hops, "stall", None, None, None, None).csv() + "\n")
                else:
                    relay = agent.current_relay
                    if t_first is None:
                        t_first = t
                    good = not blocked_from_draw(world, holder, relay, coins(t)[row[(holder, relay)]])
                    if good:
                        rx = rx_power_dbm(world.distance(holder, relay), shadow[t], radio)
                        good = capacity_from_rx(rx, radio) * cfg.slot >= need_bits
                    z = ack_draw(good, channel.k, u=ack_u[t])
                    before = agent.belief
                    on_ack(agent, z, channel)
                    stats.transmit_slots += 1
                    stats._bump("per_hop_transmit", hops)
                    if trace is not None:
                        trace.write(SlotEvent(frame, l, hops, "transmit", int(good), z, before,
                                              agent.belief).csv() + "\n")
                    if good:
                        holder = relay
                        hops += 1
                        if holder == world.dest:
                            stats.packets_delivered += 1
                            stats.hops_traversed += hops
                            stats.latency_sum += (t + 1 - t_first) * cfg.slot
                            holder, hops, t_first = world.source, 0, None
                    else:
                        stats.packets_lost += 1
                        stats._bump("per_hop_lost", hops)
                # the slot is charged to the hop that was active when it began
                stats._bump("per_hop_delay", h0)

            if l == N - 1:
                snap = links.snapshot(world, radio, coins(t),
                                      snap_rng.normal(0.0, radio.shadow_sigma, len(links)))
            if D and (t + 1) % hold == 0:
                step_dynamic_obstacles(world, u=moves[:, t])

        if not stalled and t_first is not None:
            stats.packets_abandoned += 1
    # slot counts -> seconds, once, so totals are exact multiples of the slot
    stats.per_hop_delay = [n * delay_unit for n in stats.per_hop_delay]
    stats.total_delay = T * delay_unit
    return stats


# ---------------------------------------------------------------------------
# Summaries

RAW_METRICS = ("packets_delivered", "packets_lost", "exploration_slots", "stalled_slots",
               "total_delay_s", "hops", "loss_per_delivered", "e2e_delay_per_packet_s")
PER_HOP_METRICS = ("loss_per_delivered_per_hop", "e2e_delay_per_packet_per_hop_s")


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    ci95: float          # half-width of the normal-approximation interval

    @property
    def low(self) -> float:
        return self.mean - self.ci95

    @property
    def high(self) -> float:
        return self.mean + self.ci95


@dataclass(frozen=True)
class Summary:
    n: int
    metrics: dict                 # name -> MetricSummary
    per_hop_series: dict          # per-hop counter name -> mean value at each hop index
    ci_defined: bool              # False for a single episode (spread reported as 0)

    def __getitem__(self, name) -> MetricSummary:
        return self.metrics[name]


def summarize(values) -> MetricSummary:
    """Mean, sample standard deviation and 95% half-width of one sample."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values to summarize")
    if x.size == 1:
        return MetricSummary(float(x[0]), 0.0, 0.0)
    # sort first so the result does not depend on input order
    x = np.sort(x)
    sd = float(x.std(ddof=1))
    return MetricSummary(float(x.mean()), sd, 1.96 * sd / math.sqrt(x.size))


def aggregate(stats: Sequence[EpisodeStats]) -> Summary:
    """Per-metric mean, spread and 95% CI over episodes, raw and per hop.

    Two per-hop views are reported: the ratios divided by the mean path length
    (``*_per_hop`` metrics) and the per-hop counters averaged by hop index
    (``per_hop_series``).
    """
    stats = list(stats)
    if not stats:
        raise ValueError("aggregate needs at least one episode")
    rows = [st.metrics() for st in stats]
    metrics = {name: summarize([r[name] for r in rows]) for name in RAW_METRICS + PER_HOP_METRICS}
    series = {}
    for name in ("per_hop_lost", "per_hop_transmit", "per_hop_exploration",
                 "per_hop_stalled", "per_hop_delay"):
        width = max(len(getattr(st, name)) for st in stats)
        acc = np.zeros(width)
        for st in stats:
            arr = getattr(st, name)
            acc[:len(arr)] += arr
        series[name] = (acc / len(stats)).tolist()
    return Summary(len(stats), metrics, series, len(stats) > 1)


# ---------------------------------------------------------------------------
# Synthetic channel that follows the POMDP model exactly

def _finite_rule(solution: DpSolution):
    th = np.asarray(solution.thresholds)
    return lambda l, belief, failures: belief >= th[l]


def always_continue_rule(l, belief, failures):
    return np.ones_like(belief, dtype=bool)


def switch_after_rule(r: int):
    """Explore once ``r`` ACKs in a row have gone missing."""
    def rule(l, belief, failures):
        return failures < r
    return rule


def run_matched_channel(channel: ChannelParams, rule, frames: int, seed: int = 0,
                        b0: float = 1.0) -> np.ndarray:
    """Per-frame cost of a decision rule on the two-state Markov link itself.

    The link starts good with probability ``b0``. In slot ``l`` a continuing
    agent pays the expected loss penalty ``C * (1 - k * x_l)`` of its true
    state; the state then moves one Markov step and the agent sees the ACK of
    the new state. Exploring costs ``C`` and ends the frame. The last slot
    always continues. Draws depend only on ``seed``, so different rules see
    the same channel realisations.

    ``rule(l, belief, failures)`` gets arrays over the frames still running
    and returns True where the agent continues.
    """
    if frames < 1:
        raise ValueError("frames must be positive")
    p = channel
    N = p.N
    g = rngmod.substream(seed, rngmod.CHANNEL)
    ux = g.random((N, frames))
    uz = g.random((N, frames))
    x = ux[0] < b0
    belief = np.full(frames, float(b0))
    failures = np.zeros(frames, dtype=np.int64)
    active = np.ones(frames, dtype=bool)
    cost = np.zeros(frames)
    for l in range(N):
        if l < N - 1:
            go = rule(l, belief, failures) | ~active
            explore = active & ~go
            cost[explore] += p.C
            active &= go
        cost[active] += p.C * (1.0 - p.k * x[active])
        if l == N - 1:
            break
        x = np.where(x, ux[l + 1] < p.q, ux[l + 1] < p.s)
        z = x & (uz[l + 1] < p.k)
        pred = p.q * belief + p.s * (1.0 - belief)
        denom = 1.0 - pred * p.k
        miss = np.where(denom > 0, pred * (1.0 - p.k) / np.where(denom > 0, denom, 1.0), 0.0)
        belief = np.where(z, 1.0, miss)
        failures = np.where(z, 0, failures + 1)
    return cost


def matched_channel_comparison(channel: ChannelParams, frames: int, seed: int = 0) -> dict:
    """Cost summaries of the finite-horizon POMDP rule and two fixed rules."""
    rules = {
        "pomdp_finite": _finite_rule(solve_finite(channel)),
        "always_continue": always_continue_rule,
        "switch_after_1": switch_after_rule(1),
    }
    return {name: summarize(run_matched_channel(channel, rule, frames, seed))
            for name, rule in rules.items()}
