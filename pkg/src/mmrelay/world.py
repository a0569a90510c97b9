"""Zone grid, static and moving obstacles, link blockage and viable relays.

Zones are square cells addressed either by ``(x, y)`` or by the flat index
``y * nx + x``. Links run between zone centres; a link is obstructed by any
cell its centre-to-centre segment touches (closed cells, so grazing a corner
counts).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .radio import RadioParams, capacity_from_rx, rx_power_dbm

RELAY_RINGS = 2          # relays are searched within two rings around a zone
DYNAMIC_BLOCK_PROB = 0.5
SEGMENT_EPS = 1e-9


@dataclass(frozen=True)
class WorldConfig:
    nx: int = 10
    ny: int = 10
    cell: float = 10.0                      # m
    static_count: int = 16
    dynamic_count: int = 0
    source: tuple[int, int] = (0, 0)
    dest: tuple[int, int] = (9, 9)
    blockage_gating: str = "geometric"      # or "global"

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or not self.cell > 0:
            raise ValueError("grid must be non-empty with positive cell size")
        for name in ("source", "dest"):
            x, y = getattr(self, name)
            if not (0 <= x < self.nx and 0 <= y < self.ny):
                raise ValueError(f"{name} {getattr(self, name)} outside the grid")
        if tuple(self.source) == tuple(self.dest):
            raise ValueError("source and destination must differ")
        if self.static_count < 0 or self.dynamic_count < 0:
            raise ValueError("obstacle counts must be non-negative")
        if self.blockage_gating not in ("geometric", "global"):
            raise ValueError("blockage_gating must be 'geometric' or 'global'")

    @property
    def n_zones(self) -> int:
        return self.nx * self.ny

    def index(self, xy) -> int:
        return xy[1] * self.nx + xy[0]

    def coords(self, i: int) -> tuple[int, int]:
        return i % self.nx, i // self.nx


def segment_touches_cell(p0, p1, cell_xy, eps: float = SEGMENT_EPS) -> bool:
    """Whether segment p0-p1 meets the closed unit cell at ``cell_xy`` (cell units)."""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    cx, cy = cell_xy
    for pdelta, q in ((-dx, x0 - (cx - eps)), (dx, (cx + 1 + eps) - x0),
                      (-dy, y0 - (cy - eps)), (dy, (cy + 1 + eps) - y0)):
        if pdelta == 0.0:
            if q < 0.0:
                return False
            continue
        t = q / pdelta
        if pdelta < 0.0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return False
    return True


@lru_cache(maxsize=None)
def segment_cells(nx: int, ny: int, i: int, j: int) -> tuple[int, ...]:
    """Flat indices of every cell touched by the segment between zone centres."""
    xi, yi = i % nx, i // nx
    xj, yj = j % nx, j // nx
    p0 = (xi + 0.5, yi + 0.5)
    p1 = (xj + 0.5, yj + 0.5)
    out = []
    for y in range(max(min(yi, yj) - 1, 0), min(max(yi, yj) + 1, ny - 1) + 1):
        for x in range(max(min(xi, xj) - 1, 0), min(max(xi, xj) + 1, nx - 1) + 1):
            if segment_touches_cell(p0, p1, (x, y)):
                out.append(y * nx + x)
    return tuple(out)


@lru_cache(maxsize=None)
def ring_neighbours(nx: int, ny: int, i: int, rings: int = RELAY_RINGS) -> tuple[int, ...]:
    x, y = i % nx, i // nx
    out = []
    for yy in range(max(y - rings, 0), min(y + rings, ny - 1) + 1):
        for xx in range(max(x - rings, 0), min(x + rings, nx - 1) + 1):
            if (xx, yy) != (x, y):
                out.append(yy * nx + xx)
    return tuple(out)


@lru_cache(maxsize=None)
def _move_table(nx: int, ny: int):
    # per cell: the cell itself plus its in-grid 8-neighbours, and their count
    n = nx * ny
    table = np.zeros((n, 9), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    for i in range(n):
        opts = (i,) + ring_neighbours(nx, ny, i, 1)
        table[i, :len(opts)] = opts
        count[i] = len(opts)
    return table, count


@dataclass
class ViableRelaySet:
    owner: int
    candidates: tuple[int, ...]

    def __contains__(self, j):
        return j in self.candidates

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


@dataclass
class GridWorld:
    """One episode's world. Mutable: dynamic obstacles move in place."""

    config: WorldConfig
    static_obstacles: frozenset[int]
    dynamic: np.ndarray                       # current cell of each moving obstacle
    source: int
    dest: int
    _static_mask: np.ndarray = field(init=False, repr=False)
    _occupancy: list = field(init=False, repr=False)
    _viable: dict = field(init=False, repr=False)
    _static_links: dict = field(init=False, repr=False)

    def __post_init__(self):
        cfg = self.config
        if len(self.static_obstacles) > 0 and (
                self.source in self.static_obstacles or self.dest in self.static_obstacles):
            raise ValueError("source/destination cannot hold a static obstacle")
        mask = np.zeros(cfg.n_zones, dtype=bool)
        mask[list(self.static_obstacles)] = True
        self._static_mask = mask
        self.dynamic = np.asarray(self.dynamic, dtype=np.int64)
        self._refresh_occupancy()
        self._viable = {}
        self._static_links = {}

    @property
    def nx(self) -> int:
        return self.config.nx

    @property
    def ny(self) -> int:
        return self.config.ny

    @property
    def n_zones(self) -> int:
        return self.config.n_zones

    def _refresh_occupancy(self):
        self._occupancy = np.bincount(self.dynamic, minlength=self.n_zones).tolist()

    def center(self, i: int) -> tuple[float, float]:
        x, y = i % self.nx, i // self.nx
        c = self.config.cell
        return ((x + 0.5) * c, (y + 0.5) * c)

    def distance(self, i: int, j: int) -> float:
        return _zone_distance(self.nx, i, j) * self.config.cell

    def cells_on(self, i: int, j: int) -> tuple[int, ...]:
        return segment_cells(self.nx, self.ny, i, j)

    def statically_blocked(self, i: int, j: int) -> bool:
        hit = self._static_links.get((i, j))
        if hit is None:
            static = self.static_obstacles
            hit = any(c in static for c in segment_cells(self.nx, self.ny, i, j))
            self._static_links[(i, j)] = hit
        return hit

    def obstacles_on(self, i: int, j: int) -> int:
        """Moving obstacles that can block link i-j this slot."""
        if self.config.blockage_gating == "global":
            return len(self.dynamic)
        occ = self._occupancy
        return sum(occ[c] for c in segment_cells(self.nx, self.ny, i, j))

    def snapshot(self) -> np.ndarray:
        return self.dynamic.copy()


@lru_cache(maxsize=None)
def _zone_distance(nx: int, i: int, j: int) -> float:
    return math.hypot(i % nx - j % nx, i // nx - j // nx)


def build_world(cfg: WorldConfig, seed: int) -> GridWorld:
    """Place obstacles for one episode, deterministically from ``seed``.

    Static obstacles are a uniform random subset of the cells other than the
    source and destination. Each moving obstacle starts in a uniform cell.
    Obstacle ``m`` has its own stream, so a world with more moving obstacles
    contains the same first ones.
    """
    n = cfg.n_zones
    src, dst = cfg.index(cfg.source), cfg.index(cfg.dest)
    free = np.array([c for c in range(n) if c not in (src, dst)])
    if cfg.static_count >= len(free):
        raise ValueError(f"cannot place {cfg.static_count} static obstacles in {len(free)} free cells")
    order = rngmod.substream(seed, rngmod.STATIC_PLACEMENT).permutation(free)
    static = frozenset(int(c) for c in order[:cfg.static_count])
    dynamic = np.array([rngmod.substream(seed, rngmod.OBSTACLE_START, m).integers(n)
                        for m in range(cfg.dynamic_count)], dtype=np.int64)
    return GridWorld(cfg, static, dynamic, src, dst)


def viable_relays(i: int, world: GridWorld) -> ViableRelaySet:
    """Zones within two rings of ``i`` that are strictly closer to the
    destination and free of static obstacles."""
    cached = world._viable.get(i)
    if cached is not None:
        return cached
    nx, ny, dst = world.nx, world.ny, world.dest
    d_own = _zone_distance(nx, i, dst)
    cands = tuple(j for j in ring_neighbours(nx, ny, i)
                  if j not in world.static_obstacles and _zone_distance(nx, j, dst) < d_own - 1e-12)
    out = ViableRelaySet(i, cands)
    world._viable[i] = out
    return out


def dest_reachable(world: GridWorld) -> frozenset[int]:
    """Zones with a chain of viable, statically clear links to the destination."""
    cached = world._viable.get("reachable")
    if cached is not None:
        return cached
    nx, dst = world.nx, world.dest
    order = sorted(range(world.n_zones), key=lambda c: _zone_distance(nx, c, dst))
    ok = {dst}
    for i in order:
        if i == dst or i in world.static_obstacles:
            continue
        if any(j in ok and not world.statically_blocked(i, j) for j in viable_relays(i, world)):
            ok.add(i)
    out = frozenset(ok)
    world._viable["reachable"] = out
    return out


def step_dynamic_obstacles(world: GridWorld, rng: np.random.Generator | None = None,
                           u: np.ndarray | None = None) -> None:
    """Move every obstacle to a uniformly chosen cell among itself and its
    in-grid neighbours. ``u`` (one uniform per obstacle) overrides ``rng``."""
    D = len(world.dynamic)
    if D == 0:
        return
    if u is None:
        u = rng.random(D)
    table, count = _move_table(world.nx, world.ny)
    cur = world.dynamic
    pick = np.minimum((np.asarray(u) * count[cur]).astype(np.int64), count[cur] - 1)
    world.dynamic = table[cur, pick]
    world._refresh_occupancy()


def blocked_from_draw(world: GridWorld, i: int, j: int, u: float) -> bool:
    """Blockage of link i-j given one uniform draw ``u``.

    Each moving obstacle on the segment blocks independently with probability
    one half, so the link stays clear with probability ``0.5 ** n``;
    comparing a single uniform against that is the same law as flipping
    ``n`` coins, and is monotone in ``n`` for a fixed ``u``.
    """
    if world.statically_blocked(i, j):
        return True
    n = world.obstacles_on(i, j)
    return n > 0 and u < 1.0 - (1.0 - DYNAMIC_BLOCK_PROB) ** n


def link_blocked(i: int, j: int, world: GridWorld, rng: np.random.Generator) -> bool:
    if i == j:
        raise ValueError("a link needs two distinct zones")
    return blocked_from_draw(world, i, j, rng.random())


def link_capacity(i: int, j: int, world: GridWorld, radio: RadioParams, shadow_draw: float) -> float:
    return float(capacity_from_rx(rx_power_dbm(world.distance(i, j), shadow_draw, radio), radio))


def true_link_state(i: int, j: int, world: GridWorld, radio: RadioParams, rng: np.random.Generator,
                    packet_bytes: int = 65535, slot: float = 0.1) -> bool:
    """True (good) iff the link is unobstructed and a fresh shadowing draw
    leaves enough capacity for one packet per slot."""
    if link_blocked(i, j, world, rng):
        return False
    shadow = rng.normal(0.0, radio.shadow_sigma)
    return link_capacity(i, j, world, radio, shadow) * slot >= 8.0 * packet_bytes


def write_obstacle_trace(fh, slot: int, world: GridWorld) -> None:
    """Append ``slot,obstacle_id,cell_x,cell_y`` lines for every moving obstacle."""
    nx = world.nx
    for m, c in enumerate(world.dynamic.tolist()):
        fh.write(f"{slot},{m},{c % nx},{c // nx}\n")
