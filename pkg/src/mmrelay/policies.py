"""Relay decisions: BS assignment at frame start, local continue/explore mid-frame."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .pomdp import (ChannelParams, DpSolution, StationaryPolicy, belief_update,
                    failure_run_policy, solve_finite, stationary_threshold)
from .radio import RadioParams, rx_power_dbm
from .world import GridWorld, blocked_from_draw, dest_reachable, segment_cells, viable_relays


class PolicyKind(str, enum.Enum):
    POMDP_FINITE = "pomdp_finite"
    POMDP_STATIONARY = "pomdp_stationary"
    RSS_BASELINE = "rss"
    THROUGHPUT_BASELINE = "throughput"

    @property
    def is_pomdp(self) -> bool:
        return self in (PolicyKind.POMDP_FINITE, PolicyKind.POMDP_STATIONARY)

    @property
    def bs_metric(self) -> "PolicyKind":
        # POMDP agents start every frame on the BS's throughput-based chain
        return PolicyKind.THROUGHPUT_BASELINE if self.is_pomdp else self


CONTINUE = "continue"
EXPLORE = "explore"


class NoPathError(RuntimeError):
    """The BS found no viable next hop from some zone on the way."""


@dataclass
class AgentState:
    zone: int
    current_relay: int | None
    policy: PolicyKind
    solution: DpSolution | StationaryPolicy | None = None
    belief: float = 1.0
    consecutive_failures: int = 0
    slot_index: int = 0


@lru_cache(maxsize=64)
def policy_solution(kind: PolicyKind, channel: ChannelParams):
    """Immutable solution object shared by every agent of this kind."""
    if kind is PolicyKind.POMDP_FINITE:
        return solve_finite(channel)
    if kind is PolicyKind.POMDP_STATIONARY:
        return failure_run_policy(channel, stationary_threshold(channel))
    return None


def local_decide(agent: AgentState) -> str:
    kind = agent.policy
    if kind is PolicyKind.POMDP_FINITE:
        return CONTINUE if agent.belief >= agent.solution.thresholds[agent.slot_index] else EXPLORE
    if kind is PolicyKind.POMDP_STATIONARY:
        return EXPLORE if agent.consecutive_failures >= agent.solution.r else CONTINUE
    return CONTINUE


def on_ack(agent: AgentState, z: int, channel: ChannelParams) -> None:
    agent.belief = belief_update(agent.belief, z, channel)
    agent.consecutive_failures = 0 if z else agent.consecutive_failures + 1
    agent.slot_index += 1


def reset_link(agent: AgentState, relay: int, prior: float = 1.0) -> None:
    agent.current_relay = relay
    agent.belief = prior
    agent.consecutive_failures = 0


def explore_select(agent: AgentState, world: GridWorld, radio: RadioParams,
                   rng: np.random.Generator, prior: float = 1.0, coin=None) -> int | None:
    """Probe the other viable relays for one slot and switch to the strongest
    unobstructed one. Keeps the current relay if nothing is reachable.

    ``coin(i, j)`` supplies the blockage uniform of link i-j for this slot so
    the probe sees the same blockage as a transmission would; without it the
    uniforms come from ``rng``. Shadowing is always drawn fresh from ``rng``.
    """
    cands = [j for j in viable_relays(agent.zone, world) if j != agent.current_relay]
    if not cands:
        return agent.current_relay
    if coin is None:
        u = rng.random(len(cands))
    else:
        u = [coin(agent.zone, j) for j in cands]
    shadow = rng.normal(0.0, radio.shadow_sigma, len(cands))
    best, best_rx = None, -math.inf
    for j, uj, sh in zip(cands, u, shadow):
        if blocked_from_draw(world, agent.zone, j, uj):
            continue
        rx = rx_power_dbm(world.distance(agent.zone, j), sh, radio)
        if rx > best_rx or (rx == best_rx and j < best):
            best, best_rx = j, rx
    if best is None:
        return agent.current_relay
    reset_link(agent, best, prior)
    return best


@dataclass
class LinkSnapshot:
    """Link states the BS saw at the end of the previous frame.

    Indexed by ``(i, j)``; blocked links carry ``-inf`` received power and
    zero capacity.
    """

    blocked: dict = field(default_factory=dict)
    rx_dbm: dict = field(default_factory=dict)
    capacity: dict = field(default_factory=dict)

    def score_inputs(self, i, j):
        return self.blocked[(i, j)], self.rx_dbm[(i, j)], self.capacity[(i, j)]


def baseline_metric(kind: PolicyKind, candidate: tuple[int, int], stale: LinkSnapshot,
                    prefix_capacity: float = math.inf) -> float:
    """Score of extending the chain over link ``candidate = (i, j)``.

    RSS: stale received power. Throughput: bottleneck capacity of the chain
    so far extended by this link. Stale-blocked links score ``-inf``.
    """
    blocked, rx, cap = stale.score_inputs(*candidate)
    if blocked:
        return -math.inf
    if kind is PolicyKind.RSS_BASELINE:
        return rx
    if kind is PolicyKind.THROUGHPUT_BASELINE:
        return min(prefix_capacity, cap)
    raise ValueError(f"{kind} has no BS metric")


def bs_global_assign(world: GridWorld, stale: LinkSnapshot, kind: PolicyKind,
                     start: int | None = None) -> list[int]:
    """Greedy hop-by-hop chain from ``start`` (default: source) to the destination.

    The BS knows the static layout, so links through a static obstacle and
    relays with no statically clear way onward are never offered; among the
    rest the metric of ``kind`` decides, lowest zone index on ties.
    """
    metric = kind.bs_metric
    reachable = dest_reachable(world)
    node = world.source if start is None else start
    chain = [node]
    bottleneck = math.inf
    while node != world.dest:
        best, best_score = None, None
        for j in viable_relays(node, world):
            if j not in reachable or world.statically_blocked(node, j):
                continue
            sc = baseline_metric(metric, (node, j), stale, bottleneck)
            if best is None or sc > best_score:
                best, best_score = j, sc
        if best is None:
            raise NoPathError(f"no viable next hop from zone {node}")
        _, _, cap = stale.score_inputs(node, best)
        bottleneck = min(bottleneck, cap)
        node = best
        chain.append(node)
    return chain


class LinkTable:
    """Every viable (zone, relay) link of a world, for vectorised snapshots."""

    def __init__(self, world: GridWorld, radio: RadioParams):
        pairs = [(i, j) for i in range(world.n_zones) for j in viable_relays(i, world)]
        self.pairs = pairs
        self.row = {pair: r for r, pair in enumerate(pairs)}
        n = len(pairs)
        self.dist = np.array([world.distance(i, j) for i, j in pairs])
        self.static = np.array([world.statically_blocked(i, j) for i, j in pairs], dtype=bool)
        # touched cells of every link, flattened, with each link's start offset
        cells = [segment_cells(world.nx, world.ny, i, j) for i, j in pairs]
        self.cell_index = np.fromiter((c for cs in cells for c in cs), dtype=np.int64)
        self.cell_start = np.cumsum([0] + [len(cs) for cs in cells[:-1]]).astype(np.int64)
        self.base_rx = rx_power_dbm(self.dist, 0.0, radio) if n else np.zeros(0)

    def __len__(self):
        return len(self.pairs)

    def obstacle_counts(self, world: GridWorld) -> np.ndarray:
        """Moving obstacles that can block each link this slot."""
        if world.config.blockage_gating == "global":
            return np.full(len(self), len(world.dynamic), dtype=float)
        if not len(self):
            return np.zeros(0)
        occ = np.bincount(world.dynamic, minlength=world.n_zones).astype(float)
        return np.add.reduceat(occ[self.cell_index], self.cell_start)

    def snapshot(self, world: GridWorld, radio: RadioParams, u: np.ndarray,
                 shadow: np.ndarray) -> LinkSnapshot:
        n_obst = self.obstacle_counts(world)
        blocked = self.static | ((n_obst > 0) & (u < 1.0 - 0.5 ** n_obst))
        rx = self.base_rx + shadow
        snr = 10.0 ** ((rx - radio.noise_dbm) / 10.0)
        cap = radio.bandwidth * np.log2(1.0 + snr)
        rx = np.where(blocked, -np.inf, rx)
        cap = np.where(blocked, 0.0, cap)
        snap = LinkSnapshot()
        snap.blocked = dict(zip(self.pairs, blocked.tolist()))
        snap.rx_dbm = dict(zip(self.pairs, rx.tolist()))
        snap.capacity = dict(zip(self.pairs, cap.tolist()))
        return snap
