"""Concave piecewise-linear functions on [0, 1] stored as a lower envelope.

A value ``f(b) = min_i (eta_i + beta_i * b)`` is kept as the minimal set of
lines that actually attain the minimum somewhere on the unit interval,
ordered left to right (equivalently by decreasing slope).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

# Pieces whose attaining interval inside [0, 1] is shorter than this are dropped.
PRUNE_TOL = 1e-12


class LinearPiece(NamedTuple):
    eta: float
    beta: float

    def __call__(self, b):
        return self.eta + self.beta * b


def _cross(p1: LinearPiece, p2: LinearPiece) -> float:
    # x where p1 and p2 meet; callers guarantee beta1 > beta2
    return (p2.eta - p1.eta) / (p1.beta - p2.beta)


def _hull(lines: list[LinearPiece]) -> list[LinearPiece]:
    """Lower envelope of lines over the whole real line.

    ``lines`` must be sorted by strictly decreasing slope.
    """
    hull: list[LinearPiece] = []
    for line in lines:
        while len(hull) >= 2 and _cross(hull[-2], line) <= _cross(hull[-2], hull[-1]):
            hull.pop()
        hull.append(line)
    return hull


def _clip(hull: list[LinearPiece], tol: float) -> list[LinearPiece]:
    """Drop hull lines whose attaining interval within [0, 1] is shorter than tol."""
    while True:
        n = len(hull)
        if n == 1:
            return hull
        cuts = [_cross(hull[i], hull[i + 1]) for i in range(n - 1)]
        lo = [0.0] + [min(max(c, 0.0), 1.0) for c in cuts]
        hi = [min(max(c, 0.0), 1.0) for c in cuts] + [1.0]
        keep = [i for i in range(n) if hi[i] - lo[i] > tol]
        if len(keep) == n:
            return hull
        if not keep:
            # every interval degenerate: keep the line that is lowest at the midpoint
            return [min(hull, key=lambda p: p(0.5))]
        # removing a line changes neighbouring breakpoints; re-hull the survivors
        hull = _hull([hull[i] for i in keep])


def lower_envelope(pieces: Iterable[LinearPiece | tuple[float, float]],
                   tol: float = PRUNE_TOL) -> "PwlValue":
    """Minimal subset of ``pieces`` whose pointwise minimum on [0, 1] is unchanged.

    Raises ValueError("no pieces") on empty input.
    """
    lines = [LinearPiece(float(e), float(s)) for e, s in pieces]
    if not lines:
        raise ValueError("no pieces")
    if not all(np.isfinite(e) and np.isfinite(s) for e, s in lines):
        raise ValueError("pieces must be finite")
    # decreasing slope; among equal slopes the smallest intercept comes first
    lines.sort(key=lambda p: (-p.beta, p.eta))
    dedup: list[LinearPiece] = []
    for line in lines:
        if dedup and dedup[-1].beta == line.beta:
            continue
        dedup.append(line)
    return PwlValue(tuple(_clip(_hull(dedup), tol)))


@dataclass(frozen=True)
class PwlValue:
    """Concave piecewise-linear function on [0, 1], ``min`` over its pieces.

    Construct through :func:`lower_envelope` to get the pruned form; the
    constructor itself does not prune.
    """

    pieces: tuple[LinearPiece, ...]
    _eta: np.ndarray = field(init=False, repr=False, compare=False)
    _beta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("no pieces")
        object.__setattr__(self, "_eta", np.array([p.eta for p in self.pieces]))
        object.__setattr__(self, "_beta", np.array([p.beta for p in self.pieces]))

    def __call__(self, b):
        if np.ndim(b) == 0:
            b = float(b)
            return min(e + s * b for e, s in self.pieces)
        b = np.asarray(b, dtype=float)
        return np.min(self._eta[:, None] + self._beta[:, None] * b.ravel()[None, :],
                      axis=0).reshape(b.shape)

    def __len__(self):
        return len(self.pieces)

    @property
    def eta(self) -> np.ndarray:
        return self._eta

    @property
    def beta(self) -> np.ndarray:
        return self._beta

    def breakpoints(self) -> list[float]:
        """Interior kinks, left to right (empty for a single piece)."""
        return [_cross(self.pieces[i], self.pieces[i + 1])
                for i in range(len(self.pieces) - 1)]

    def intervals(self) -> list[tuple[float, float]]:
        """Attaining interval of each piece inside [0, 1]."""
        cuts = self.breakpoints()
        return list(zip([0.0] + cuts, cuts + [1.0]))
