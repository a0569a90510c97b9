"""Belief filter and exact finite-horizon DP for the two-state relay link.

The link is good (1) or bad (0). A good link stays good with probability
``q``; a bad link recovers with probability ``s``. A transmission on a good
link is acknowledged with probability ``k``; a bad link never acknowledges.
Losing a packet costs ``C`` slot-delays, and so does exploring for a new
relay. Each slot the sender either continues on its relay or pays ``C`` to
explore and switch.

The value functions are concave and piecewise linear in the belief, so the
backward recursion is carried out exactly on :class:`~mmrelay.pwl.PwlValue`
envelopes rather than on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .pwl import LinearPiece, PwlValue, lower_envelope

UNBOUNDED = math.inf
"""Failure-run length meaning "never explore"; compares above every count."""

FIXED_POINT_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """Threshold iteration did not settle within the allowed backups."""

    def __init__(self, message, last, previous):
        super().__init__(message)
        self.last = last
        self.previous = previous


@dataclass(frozen=True)
class ChannelParams:
    """Two-state link model.

    Parameters
    ----------
    q : float
        P(good -> good) per slot.
    s : float
        P(bad -> good) per slot; must satisfy ``s < q``.
    k : float
        P(ACK | good, transmit).
    C : float
        Penalty of one lost packet, equal to one exploration.
    N : int
        Slots per BS frame, i.e. the decision horizon.
    """

    q: float = 0.9
    s: float = 0.1
    k: float = 0.8
    C: float = 1.0
    N: int = 10

    def __post_init__(self):
        if not (0.0 <= self.s < self.q <= 1.0):
            raise ValueError(f"need 0 <= s < q <= 1, got q={self.q}, s={self.s}")
        if not (0.0 <= self.k <= 1.0):
            raise ValueError(f"need 0 <= k <= 1, got k={self.k}")
        if not self.C > 0:
            raise ValueError(f"need C > 0, got C={self.C}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"need integer N >= 2, got N={self.N}")

    def predict(self, b):
        """P(good next slot | good now with prob. b)."""
        return self.q * b + self.s * (1.0 - b)

    def ack_probability(self, b):
        """P(ACK on the next transmission | belief b)."""
        return self.predict(b) * self.k


def belief_update(b: float, z: int, p: ChannelParams) -> float:
    """Posterior P(good) after one more slot and ACK outcome ``z``."""
    if z:
        return 1.0
    pred = p.predict(b)
    den = 1.0 - pred * p.k
    if den <= 0.0:
        # k = 1 and the link is surely good: a missing ACK has probability 0
        return 0.0
    return min(max(pred * (1.0 - p.k) / den, 0.0), 1.0)


def slot_penalty(b: float, p: ChannelParams) -> float:
    """Expected loss penalty of transmitting in the current slot."""
    return (1.0 - p.k * b) * p.C


def terminal_value(p: ChannelParams) -> PwlValue:
    """Cost-to-go in the last slot of the frame, where no exploring is possible."""
    return PwlValue((LinearPiece(p.C, -p.k * p.C),))


def dp_backup(J_next: PwlValue, p: ChannelParams) -> tuple[PwlValue, PwlValue]:
    """One backward step: ``(A_l, J_l)`` from ``J_{l+1}``.

    ``A_l`` is the expected cost of continuing; ``J_l = min(C, A_l)``. Every
    line ``eta + beta * b'`` of ``J_{l+1}``, evaluated at ``b' = Phi(b, 0)``
    and weighted by P(no ACK | b), is again linear in ``b``; adding the
    linear loss and ACK-success terms gives the pieces of ``A_l`` directly.
    """
    q, s, k, C = p.q, p.s, p.k, p.C
    d = q - s
    j_one = J_next(1.0)
    # (1 - kb)C + (s + d b) k J(1)
    head_eta = C + s * k * j_one
    head_beta = -k * C + d * k * j_one
    pieces = []
    for eta, beta in J_next.pieces:
        # eta (1 - pred k) + beta pred (1 - k), pred = s + d b
        pieces.append((head_eta + eta * (1.0 - s * k) + beta * s * (1.0 - k),
                       head_beta - eta * d * k + beta * d * (1.0 - k)))
    A = lower_envelope(pieces)
    J = lower_envelope(list(A.pieces) + [(C, 0.0)])
    return A, J


def threshold_of(A: PwlValue, C: float) -> float:
    """Belief above which continuing is (weakly) optimal, i.e. ``A(alpha) = C``.

    ``A`` must be non-increasing on [0, 1]. Ties go to continuing.
    """
    if A(1.0) >= C:
        return 1.0
    if A(0.0) <= C:
        return 0.0
    for (lo, hi), (eta, beta) in zip(A.intervals(), A.pieces):
        if eta + beta * hi <= C:
            if beta == 0.0:
                return lo
            return min(max((C - eta) / beta, lo), hi)
    return 1.0  # unreachable for a non-increasing A with A(1) < C


@dataclass(frozen=True)
class DpSolution:
    """Finite-horizon solution.

    ``values[l]`` is ``J_l`` for ``l = 0..N-1``; ``continue_values[l]`` is
    ``A_l`` for ``l = 0..N-2``; ``thresholds[l]`` is ``alpha_l`` with the
    final slot fixed at 0 (no explore option there).
    """

    params: ChannelParams
    values: tuple[PwlValue, ...]
    continue_values: tuple[PwlValue, ...]
    thresholds: tuple[float, ...]

    @property
    def N(self) -> int:
        return self.params.N

    def threshold(self, l: int) -> float:
        return self.thresholds[l]


def solve_finite(p: ChannelParams, backup=None) -> DpSolution:
    """Exact backward recursion over the whole frame.

    ``backup`` replaces :func:`dp_backup`; it exists so the verification
    suite can be pointed at a deliberately broken step.
    """
    backup = dp_backup if backup is None else backup
    N = p.N
    values = [terminal_value(p)]
    conts = []
    for _ in range(N - 1):
        A, J = backup(values[0], p)
        values.insert(0, J)
        conts.insert(0, A)
    thresholds = tuple(threshold_of(A, p.C) for A in conts) + (0.0,)
    return DpSolution(p, tuple(values), tuple(conts), thresholds)


def stationary_threshold(p: ChannelParams, tol: float = 1e-9, max_iter: int = 100_000,
                         full_output: bool = False):
    """Limit of the threshold as the remaining horizon grows.

    Backs up from the terminal value until two successive thresholds differ
    by less than ``tol``. Thresholds grow with the remaining horizon, so the
    returned value is at least every threshold seen along the way.

    Returns ``alpha_bar``, or ``(alpha_bar, backups)`` if ``full_output``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    J = terminal_value(p)
    prev = None
    for it in range(1, max_iter + 1):
        A, J = dp_backup(J, p)
        alpha = threshold_of(A, p.C)
        if prev is not None and abs(alpha - prev) < tol:
            return (alpha, it) if full_output else alpha
        prev = alpha
    raise ConvergenceError(
        f"threshold did not converge in {max_iter} backups "
        f"(last {alpha!r}, previous {prev!r})", alpha, prev)


def failure_fixed_point(p: ChannelParams) -> float:
    """Limit of repeated missing-ACK updates started from belief 1.

    Solves ``b = Phi(b, 0)``, i.e.
    ``k d b^2 - (1 - k s - (1 - k) d) b + (1 - k) s = 0`` with ``d = q - s``,
    taking its root in [0, 1]. The quadratic is positive at 0 and
    non-positive at 1, so that root is the smaller one.
    """
    q, s, k = p.q, p.s, p.k
    if q >= 1.0 and k < 1.0:
        return 1.0
    d = q - s
    a = k * d
    B = 1.0 - k * s - (1.0 - k) * d
    c = (1.0 - k) * s
    if a == 0.0:
        return c / B
    disc = B * B - 4.0 * a * c
    if disc >= 0.0 and B > 0.0:
        root = 2.0 * c / (B + math.sqrt(disc))
        if 0.0 <= root <= 1.0:
            return root
    # numerical trouble: bisect g(b) = Phi(b, 0) - b, g(0) >= 0 >= g(1)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if belief_update(mid, 0, p) - mid >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class StationaryPolicy:
    """Explore after ``r`` consecutive missing ACKs.

    ``pi[m-1]`` is the belief after ``m`` failures starting from belief 1.
    ``r`` is :data:`UNBOUNDED` when the failure beliefs never reach
    ``alpha_bar``.
    """

    alpha_bar: float
    r: float
    pi: tuple[float, ...]
    fixed_point: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.r)


def failure_run_policy(p: ChannelParams, alpha_bar: float, max_len: int = 10_000_000) -> StationaryPolicy:
    if not 0.0 <= alpha_bar <= 1.0:
        raise ValueError("alpha_bar must lie in [0, 1]")
    b_star = failure_fixed_point(p)
    pi = []
    b = 1.0
    while len(pi) < max_len:
        b = belief_update(b, 0, p)
        pi.append(b)
        if b <= alpha_bar:
            return StationaryPolicy(alpha_bar, len(pi), tuple(pi), b_star)
        # the runs decrease strictly towards b*, so they can only stall above
        # alpha_bar when b* is not below it
        if b_star >= alpha_bar and abs(b - b_star) <= FIXED_POINT_TOL:
            break
    return StationaryPolicy(alpha_bar, UNBOUNDED, tuple(pi), b_star)
