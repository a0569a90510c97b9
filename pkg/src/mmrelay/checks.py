"""Verification suite for the exact solver.

Each check draws its own seeded parameter sets, compares the solver against an
independent computation or a structural property, and returns a
:class:`CheckResult` holding the largest deviation it saw. The ``oracle``
command and the acceptance tests both run these functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .oracles import brute_force_policy_oracle, grid_dp_oracle
from .pomdp import (ChannelParams, belief_update, dp_backup, failure_fixed_point,
                    failure_run_policy, solve_finite, stationary_threshold)

CHECK_STREAM = 11          # purpose tag for parameter draws, apart from the simulator's


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_dev: float
    tol: float
    cases: int
    worst: str = ""        # parameters of the worst case, or a failure note

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  worst: {self.worst}" if self.worst else ""
        return f"{status} {self.name}: max deviation {self.max_dev:.3e} (tol {self.tol:.0e}, {self.cases} cases){extra}"


def random_params(gen: np.random.Generator, N: int = 2, C: float = 1.0,
                  nontrivial: bool = False) -> ChannelParams:
    """Uniform ``q``, ``s < q`` and ``k``; ``nontrivial`` also asks k(1+q) > 1."""
    while True:
        q = gen.uniform(0.05, 1.0)
        s = gen.uniform(0.0, q)
        k = gen.uniform(0.05, 1.0)
        if s < q and (not nontrivial or k * (1.0 + q) > 1.0):
            return ChannelParams(q, s, k, C, N)


def _fmt(p: ChannelParams) -> str:
    return f"q={p.q:.6g} s={p.s:.6g} k={p.k:.6g} C={p.C:g} N={p.N}"


def closed_form_threshold(p: ChannelParams) -> float:
    """Threshold of the second-to-last slot, solved by hand from the one-step cost."""
    return min(1.0, (1.0 - p.k * p.s) / (p.k * (1.0 + p.q - p.s)))


class _Worst:
    def __init__(self):
        self.dev, self.where = 0.0, ""

    def see(self, dev: float, where):
        if not dev <= self.dev:          # also catches NaN
            self.dev, self.where = dev, where


def check_closed_form(seed: int = 0, n_sets: int = 100, tol: float = 1e-9,
                      backup=None, nontrivial: bool = True) -> CheckResult:
    gen = rngmod.substream(seed, CHECK_STREAM, 1)
    w = _Worst()
    for _ in range(n_sets):
        p = random_params(gen, N=2, nontrivial=nontrivial)
        alpha = solve_finite(p, backup).thresholds[0]
        w.see(abs(alpha - closed_form_threshold(p)), _fmt(p))
    return CheckResult("closed_form_threshold", w.dev <= tol, w.dev, tol, n_sets, w.where)


def check_structure(seed: int = 0, n_sets: int = 20, N: int = 20, grid_points: int = 1001,
                    tol: float = 1e-9, backup=None) -> list[CheckResult]:
    """Concavity, monotonicity in slot and belief, threshold shape and bounds."""
    gen = rngmod.substream(seed, CHECK_STREAM, 2)
    b = np.linspace(0.0, 1.0, grid_points)
    names = ("concavity", "values_monotone_in_slot", "continue_monotone_in_slot",
             "continue_monotone_in_belief", "thresholds_monotone", "threshold_structure", "bounds")
    worst = {n: _Worst() for n in names}
    for _ in range(n_sets):
        p = random_params(gen, N=N, C=float(gen.uniform(0.5, 5.0)))
        sol = solve_finite(p, backup)
        where = _fmt(p)
        Js = [J(b) for J in sol.values]
        As = [A(b) for A in sol.continue_values]
        for l, J in enumerate(Js):
            # midpoint concavity on every pair of grid points two apart, plus random triples
            mid = J[1:-1] - 0.5 * (J[:-2] + J[2:])
            worst["concavity"].see(float(max(0.0, -mid.min())), f"{where} l={l}")
            b1, b2, lam = gen.random(200), gen.random(200), gen.random(200)
            Jf = sol.values[l]
            gap = lam * Jf(b1) + (1 - lam) * Jf(b2) - Jf(lam * b1 + (1 - lam) * b2)
            worst["concavity"].see(float(max(0.0, gap.max())), f"{where} l={l}")
            worst["bounds"].see(float(max(0.0, -J.min(), J.max() - p.C)), f"{where} l={l}")
        for l in range(len(Js) - 1):
            worst["values_monotone_in_slot"].see(float(max(0.0, (Js[l + 1] - Js[l]).max())), f"{where} l={l}")
        for l in range(len(As) - 1):
            worst["continue_monotone_in_slot"].see(float(max(0.0, (As[l + 1] - As[l]).max())), f"{where} l={l}")
        for l, A in enumerate(As):
            worst["continue_monotone_in_belief"].see(float(max(0.0, np.diff(A).max())), f"{where} l={l}")
            alpha = sol.thresholds[l]
            # below the threshold exploring is no worse, above it continuing is no worse
            below = A[b < alpha] - p.C
            above = A[b > alpha] - p.C
            dev = max(float(max(0.0, -below.min())) if below.size else 0.0,
                      float(max(0.0, above.max())) if above.size else 0.0)
            worst["threshold_structure"].see(dev, f"{where} l={l}")
        th = np.asarray(sol.thresholds[:-1])
        worst["thresholds_monotone"].see(float(max(0.0, np.diff(th).max())) if th.size > 1 else 0.0, where)
    return [CheckResult(n, worst[n].dev <= tol, worst[n].dev, tol, n_sets, worst[n].where) for n in names]


def check_grid_oracle(seed: int = 0, n_sets: int = 10, N: int = 50, grid_n: int = 10_000,
                      tol: float = 1e-6, backup=None) -> list[CheckResult]:
    """Exact values against the sampled-grid DP; thresholds within one grid step."""
    gen = rngmod.substream(seed, CHECK_STREAM, 3)
    wv, wt = _Worst(), _Worst()
    step = 1.0 / grid_n
    for _ in range(n_sets):
        p = random_params(gen, N=N)
        sol = solve_finite(p, backup)
        grid = grid_dp_oracle(p, grid_n)
        for l, (J, Jg) in enumerate(zip(sol.values, grid.values)):
            wv.see(float(np.abs(J(grid.grid) - Jg).max()), f"{_fmt(p)} l={l}")
        for l, (a, ag) in enumerate(zip(sol.thresholds, grid.thresholds)):
            wt.see(abs(a - ag), f"{_fmt(p)} l={l}")
    return [CheckResult("grid_oracle_values", wv.dev <= tol, wv.dev, tol, n_sets, wv.where),
            CheckResult("grid_oracle_thresholds", wt.dev <= step, wt.dev, step, n_sets, wt.where)]


def check_brute_force(seed: int = 0, n_sets: int = 10, N: int = 3,
                      beliefs=(0.0, 0.25, 0.5, 0.75, 1.0), tol: float = 1e-12,
                      backup=None) -> list[CheckResult]:
    """Exact ``J_0`` against exhaustive policy enumeration."""
    gen = rngmod.substream(seed, CHECK_STREAM, 4)
    wgap, wbeat = _Worst(), _Worst()
    for _ in range(n_sets):
        p = random_params(gen, N=N, C=float(gen.uniform(0.5, 5.0)))
        J0 = solve_finite(p, backup).values[0]
        for b0 in beliefs:
            best, costs = brute_force_policy_oracle(p, b0, return_all=True)
            v = J0(b0)
            wgap.see(abs(best - v), f"{_fmt(p)} b0={b0}")
            wbeat.see(max(0.0, v - min(costs)), f"{_fmt(p)} b0={b0}")
    cases = n_sets * len(beliefs)
    return [CheckResult("brute_force_value", wgap.dev <= tol, wgap.dev, tol, cases, wgap.where),
            CheckResult("brute_force_no_better_policy", wbeat.dev <= tol, wbeat.dev, tol, cases, wbeat.where)]


def quadratic_residual(p: ChannelParams, b: float) -> float:
    d = p.q - p.s
    return p.k * d * b * b - (1.0 - p.k * p.s - (1.0 - p.k) * d) * b + (1.0 - p.k) * p.s


def check_failure_runs(seed: int = 0, n_sets: int = 100, tol: float = 1e-10) -> list[CheckResult]:
    """First failure belief, strict decrease to the fixed point, and when runs are unbounded."""
    gen = rngmod.substream(seed, CHECK_STREAM, 5)
    w_pi1, w_dec, w_root, w_unb = _Worst(), _Worst(), _Worst(), _Worst()
    for _ in range(n_sets):
        p = random_params(gen)
        where = _fmt(p)
        pol = failure_run_policy(p, 0.0)
        pi = np.asarray(pol.pi)
        w_pi1.see(abs(pi[0] - (p.q - p.q * p.k) / (1.0 - p.q * p.k)), where)
        # strictly decreasing until the fixed point is reached
        steps = np.diff(pi)
        far = np.abs(pi[:-1] - pol.fixed_point) > 1e-12
        bad = steps[far]
        w_dec.see(float(max(0.0, bad.max())) if bad.size else 0.0, where)
        w_root.see(abs(quadratic_residual(p, pol.fixed_point)), where)
        w_root.see(abs(belief_update(pol.fixed_point, 0, p) - pol.fixed_point), where)
        # any threshold strictly below b* can never be reached
        for ab in (0.0, 0.5 * pol.fixed_point, stationary_threshold(p)):
            pol_ab = failure_run_policy(p, ab)
            wrong = (pol.fixed_point > ab) != pol_ab.unbounded
            w_unb.see(1.0 if wrong else 0.0, f"{where} alpha_bar={ab:.6g}")
    return [CheckResult("first_failure_belief", w_pi1.dev <= 1e-15, w_pi1.dev, 1e-15, n_sets, w_pi1.where),
            CheckResult("failure_beliefs_decrease", w_dec.dev == 0.0, w_dec.dev, 0.0, n_sets, w_dec.where),
            CheckResult("fixed_point_root", w_root.dev <= tol, w_root.dev, tol, n_sets, w_root.where),
            CheckResult("unbounded_iff_fixed_point_above", w_unb.dev == 0.0, w_unb.dev, 0.0, 3 * n_sets,
                        w_unb.where)]


def faulty_backup(J_next, p):
    """A backup with a small bias, for exercising the failure path of the suite."""
    A, J = dp_backup(J_next, p)
    from .pwl import lower_envelope
    A = lower_envelope([(e + 1e-3, b) for e, b in A.pieces])
    return A, lower_envelope(list(A.pieces) + [(p.C, 0.0)])


def run_suite(seed: int = 0, fault: bool = False, scale: float = 1.0) -> list[CheckResult]:
    """Every solver check. ``scale`` shrinks the case counts for quick runs."""
    backup = faulty_backup if fault else None

    def n(x):
        return max(1, int(math.ceil(x * scale)))

    out = [check_closed_form(seed, n(100), backup=backup)]
    out += check_structure(seed, n(20), backup=backup)
    out += check_grid_oracle(seed, n(10), backup=backup)
    out += check_brute_force(seed, n(10), backup=backup)
    out += check_failure_runs(seed, n(100))
    return out
