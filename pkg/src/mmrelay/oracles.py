"""Independent checks for the exact solver.

Neither oracle touches the piecewise-linear machinery: one runs the same
recursion on a sampled belief grid, the other enumerates every deterministic
policy over the ACK observation tree.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .pomdp import ChannelParams, belief_update


@dataclass(frozen=True)
class GridSolution:
    grid: np.ndarray
    values: tuple[np.ndarray, ...]           # J_l sampled on the grid, l = 0..N-1
    continue_values: tuple[np.ndarray, ...]  # A_l sampled on the grid, l = 0..N-2
    thresholds: tuple[float, ...]            # first grid point where A_l <= C; last slot 0


def grid_dp_oracle(p: ChannelParams, grid_n: int = 10_000) -> GridSolution:
    """Backward DP on ``grid_n + 1`` equally spaced beliefs.

    The cost-to-go at ``Phi(b, 0)`` is read off the previous grid by linear
    interpolation.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    q, s, k, C = p.q, p.s, p.k, p.C
    b = np.linspace(0.0, 1.0, grid_n + 1)
    pred = q * b + s * (1.0 - b)
    p_ack = pred * k
    miss = 1.0 - p_ack
    with np.errstate(divide="ignore", invalid="ignore"):
        b_fail = np.where(miss > 0.0, pred * (1.0 - k) / miss, 0.0)
    gamma = (1.0 - k * b) * C

    J = gamma.copy()
    values = [J]
    conts = []
    for _ in range(p.N - 1):
        A = gamma + p_ack * J[-1] + miss * np.interp(b_fail, b, J)
        J = np.minimum(C, A)
        values.insert(0, J)
        conts.insert(0, A)
    thresholds = []
    for A in conts:
        ok = np.flatnonzero(A <= C)
        thresholds.append(float(b[ok[0]]) if ok.size else 1.0)
    thresholds.append(0.0)
    return GridSolution(b, tuple(values), tuple(conts), tuple(thresholds))


def _decision_nodes(N: int) -> list[tuple[int, ...]]:
    # one node per ACK history z_1..z_l, for every slot l that has a choice
    return [h for l in range(N - 1) for h in itertools.product((0, 1), repeat=l)]


def brute_force_policy_oracle(p: ChannelParams, b0: float, return_all: bool = False):
    """Minimum expected cost over all deterministic history-dependent policies.

    Exploring costs C and ends the problem; continuing costs the expected
    loss penalty and reveals the next ACK. The final slot has no choice.
    Exponential in N, so N <= 4 only.
    """
    N = p.N
    if N > 4:
        raise ValueError("horizon too large for enumeration")
    nodes = _decision_nodes(N)
    q, s, k, C = p.q, p.s, p.k, p.C

    def cost(policy: dict, l: int, b: float, hist: tuple) -> float:
        if l < N - 1 and not policy[hist]:
            return C
        g = (1.0 - k * b) * C
        if l == N - 1:
            return g
        p_ack = (q * b + s * (1.0 - b)) * k
        total = g
        if p_ack > 0.0:
            total += p_ack * cost(policy, l + 1, 1.0, hist + (1,))
        if p_ack < 1.0:
            total += (1.0 - p_ack) * cost(policy, l + 1, belief_update(b, 0, p), hist + (0,))
        return total

    costs = []
    for actions in itertools.product((False, True), repeat=len(nodes)):
        policy = dict(zip(nodes, actions))
        costs.append(cost(policy, 0, float(b0), ()))
    best = min(costs)
    return (best, costs) if return_all else best
