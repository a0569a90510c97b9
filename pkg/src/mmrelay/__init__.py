"""Relay selection for multi-hop mmWave device-to-device links.

The package has two halves. :mod:`mmrelay.pomdp` (with :mod:`mmrelay.pwl`
and :mod:`mmrelay.oracles`) solves the per-link continue-or-explore problem
exactly and checks it. :mod:`mmrelay.world`, :mod:`mmrelay.radio`,
:mod:`mmrelay.policies` and :mod:`mmrelay.sim` put the resulting rules into a
grid of zones with static and moving obstacles and compare them against
signal-strength and throughput relay selection.
"""
from .pomdp import (UNBOUNDED, ChannelParams, ConvergenceError, DpSolution, StationaryPolicy,
                    belief_update, dp_backup, failure_fixed_point, failure_run_policy, slot_penalty,
                    solve_finite, stationary_threshold, terminal_value, threshold_of)
from .pwl import LinearPiece, PwlValue, lower_envelope
from .oracles import brute_force_policy_oracle, grid_dp_oracle
from .radio import RadioParams, link_budget, path_loss_db, slot_supports_packet
from .world import GridWorld, WorldConfig, build_world, viable_relays
from .policies import PolicyKind
from .sim import SimConfig, EpisodeStats, aggregate, run_episode, run_matched_channel

__version__ = "0.1.0"
