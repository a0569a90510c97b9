"""
Continue or explore: solving one relay link exactly
====================================================

A relay link is either good or bad and flips between the two as a Markov
chain. The sender never sees the state, only whether an ACK came back. It
keeps a belief (the probability the link is good) and at every slot decides
whether to keep transmitting or to spend the slot looking for a new relay.

The value functions are concave and piecewise linear, so the solver keeps
them as exact lower envelopes of lines instead of sampling a grid.
"""
import numpy as np

from mmrelay import ChannelParams, belief_update, failure_run_policy, solve_finite, stationary_threshold

# Good links stay good w.p. 0.9, bad links recover w.p. 0.1, a good link
# returns an ACK w.p. 0.8, and one lost packet costs as much as one probe.
p = ChannelParams(q=0.9, s=0.1, k=0.8, C=1.0, N=10)
sol = solve_finite(p)

# Continue in slot l exactly when the belief is at least alpha_l. Far from the
# end of the frame the cutoff is 1: any doubt at all is worth a probe.
for l, a in enumerate(sol.thresholds):
    print(f"slot {l}: continue iff belief >= {a:.6f}")

# The value of slot 0 as a handful of lines
J0 = sol.values[0]
print("slot-0 value has", len(J0), "linear pieces; breakpoints", np.round(J0.breakpoints(), 4))

# A run of missed ACKs drives the belief down towards a fixed point.
b = 1.0
for m in range(1, 5):
    b = belief_update(b, 0, p)
    print(f"after {m} missed ACKs the belief is {b:.6f}")

# Long frames: the cutoff settles, and the rule becomes "explore after r misses".
alpha_bar = stationary_threshold(p)
rule = failure_run_policy(p, alpha_bar)
print(f"long-frame cutoff {alpha_bar:.6f}; explore after {rule.r} missed ACK(s)")
print(f"repeated misses approach {rule.fixed_point:.6f}")
