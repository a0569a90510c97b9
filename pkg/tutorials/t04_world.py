"""
Zones, obstacles and blockage
=============================

The service area is a 10 x 10 grid of zones. Static obstacles occupy whole
zones and block every link whose straight segment touches them. Moving
obstacles take one king step per slot; a link with n of them on its segment
is blocked with probability 1 - 2**-n.
"""
import numpy as np

from mmrelay import WorldConfig, build_world, viable_relays
from mmrelay.world import dest_reachable, step_dynamic_obstacles

world = build_world(WorldConfig(static_count=16, dynamic_count=16), seed=4)
grid = np.full((10, 10), ".")
for c in world.static_obstacles:
    grid[c // 10, c % 10] = "#"
for c in world.dynamic:
    grid[c // 10, c % 10] = "o"
grid[0, 0], grid[9, 9] = "S", "D"
print("\n".join(" ".join(row) for row in grid[::-1]))

print("relays the source may hand to:", list(viable_relays(world.source, world)))
print("source can reach the destination:", world.source in dest_reachable(world))

rng = np.random.default_rng(1)
before = world.dynamic.copy()
step_dynamic_obstacles(world, rng)
print("obstacle moves this slot:", list(zip(before.tolist(), world.dynamic.tolist()))[:5])
