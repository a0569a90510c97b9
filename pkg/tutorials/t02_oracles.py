"""
Checking the exact solver against two independent ones
=======================================================

The exact solver is checked against a dense belief grid (values interpolated
between grid points) and against brute-force enumeration of every decision
tree for short frames. The same checks back ``python3 -m mmrelay oracle``.
"""
import numpy as np

from mmrelay import ChannelParams, brute_force_policy_oracle, grid_dp_oracle, solve_finite
from mmrelay.checks import faulty_backup, run_suite

p = ChannelParams(0.85, 0.2, 0.9, 2.0, 30)
exact = solve_finite(p)
grid = grid_dp_oracle(p, grid_n=10_000)
gap = max(np.abs(J(grid.grid) - Jg).max() for J, Jg in zip(exact.values, grid.values))
print(f"largest value gap to the grid solver over all slots: {gap:.2e}")

short = ChannelParams(0.85, 0.2, 0.9, 2.0, 3)
J0 = solve_finite(short).values[0]
for b0 in (0.0, 0.5, 1.0):
    best = brute_force_policy_oracle(short, b0)
    print(f"b0={b0}: exact {J0(b0):.12f}  enumerated {best:.12f}")

# The full suite at reduced size, then again with a deliberately biased backup
for fault in (False, True):
    results = run_suite(seed=0, fault=fault, scale=0.2)
    failed = [r.name for r in results if not r.passed]
    print("biased backup:" if fault else "correct backup:", f"{len(failed)} failing checks", failed)
