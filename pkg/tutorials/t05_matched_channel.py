"""
The rules on the channel they were designed for
===============================================

Before putting the rules in the grid world, run them on the two-state link
itself. All rules see the same channel draws, so their differences are
not diluted by sampling noise between rules.
"""
from mmrelay import ChannelParams
from mmrelay.sim import matched_channel_comparison

p = ChannelParams(0.9, 0.1, 0.8, 1.0, 10)
res = matched_channel_comparison(p, frames=100_000, seed=0)
for name, m in res.items():
    print(f"{name:16s} mean frame cost {m.mean:.5f} +- {m.ci95:.5f}")

# Exploring after the first miss is already the optimal action at every
# slot but one here, so the exact gap between those two rules is tiny.
