"""Command-line entry: ``python -m mmrelay {solve,sweep,oracle}``.

Exit status is 0 on success, 1 when a verification check fails and 2 for
configuration problems (unknown keys, invalid parameters, unusable paths).
"""
from __future__ import annotations

import argparse
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import checks
from . import rng as rngmod
from .config import ConfigError, ExperimentConfig, load_config
from .pomdp import ConvergenceError, failure_run_policy, solve_finite, stationary_threshold
from .sim import aggregate, run_episode

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2

CSV_COLUMNS = ("policy", "D", "static", "seed", "packets_delivered", "packets_lost",
               "exploration_slots", "stalled_slots", "total_delay_s", "hops",
               "loss_per_delivered", "e2e_delay_per_packet_s", "loss_per_delivered_per_hop",
               "e2e_delay_per_packet_per_hop_s")
SLOT_TRACE_HEADER = "frame,slot,hop,action,x,z,belief_before,belief_after\n"
OBSTACLE_TRACE_HEADER = "slot,obstacle_id,cell_x,cell_y\n"


# ---------------------------------------------------------------------------
# solve

def solve_report(cfg: ExperimentConfig) -> str:
    p = cfg.channel
    sol = solve_finite(p)
    out = io.StringIO()
    w = out.write
    w(f"channel: q={p.q!r} s={p.s!r} k={p.k!r} C={p.C!r} N={p.N}\n")
    lhs = p.k * (1.0 + p.q)
    if lhs > 1.0:
        w(f"nontriviality k(1+q) > 1: {lhs!r} > 1 holds\n")
    else:
        w(f"nontriviality k(1+q) > 1: {lhs!r} <= 1 fails; "
          "exploring is never strictly worse near the end, threshold trivial (alpha = 1)\n")
    w("thresholds:\n")
    for l, a in enumerate(sol.thresholds):
        w(f"  alpha_{l} = {a!r}\n")
    alpha_bar, iters = stationary_threshold(p, tol=cfg["tol"], max_iter=cfg["max_iter"], full_output=True)
    w(f"stationary threshold: {alpha_bar!r} (tol {cfg['tol']!r}, {iters} backups)\n")
    pol = failure_run_policy(p, alpha_bar)
    shown = pol.pi[:20]
    more = f" ... ({len(pol.pi)} total)" if len(pol.pi) > len(shown) else ""
    w("failure beliefs: " + ", ".join(repr(v) for v in shown) + more + "\n")
    w(f"fixed point of repeated failures: {pol.fixed_point!r}\n")
    if pol.unbounded:
        w(f"r = UNBOUNDED (fixed point {pol.fixed_point!r} > alpha_bar {alpha_bar!r})\n")
    else:
        w(f"r = {int(pol.r)}\n")
    return out.getvalue()


def cmd_solve(cfg: ExperimentConfig, out: str | None) -> int:
    try:
        report = solve_report(cfg)
    except ConvergenceError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CHECK
    sys.stdout.write(report)
    if out:
        _write_text(out, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def sweep_tasks(cfg: ExperimentConfig):
    """(policy, D, static, run, seed) in output order."""
    axis = cfg["sweep_axis"]
    for value in cfg.sweep_values:
        D = value if axis == "dynamic" else cfg["dynamic_count"]
        static = value if axis == "static" else cfg["static_count"]
        for kind in cfg["policies"]:
            for run in range(cfg["runs"]):
                yield kind, D, static, run, rngmod.run_seed(cfg["seed"], run)


def _episode(args):
    sim_cfg, traced = args
    if not traced:
        return run_episode(sim_cfg), None, None
    slots, obstacles = io.StringIO(), io.StringIO()
    stats = run_episode(sim_cfg, trace=slots, obstacle_trace=obstacles)
    return stats, slots.getvalue(), obstacles.getvalue()


def run_sweep(cfg: ExperimentConfig, trace: bool = False, jobs: int | None = None):
    """Run every sweep episode; results come back in task order whatever the
    completion order. Returns ``[(task, stats, slot_trace, obstacle_trace)]``."""
    tasks = list(sweep_tasks(cfg))
    work = [(cfg.sim(policy=kind, dynamic_count=D, static_count=st, seed=seed),
             trace and run < cfg["trace_runs"]) for kind, D, st, run, seed in tasks]
    jobs = jobs if jobs is not None else (cfg["jobs"] or os.cpu_count() or 1)
    if jobs <= 1:
        results = [_episode(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_episode, work, chunksize=max(1, len(work) // (8 * jobs))))
    return [(t,) + r for t, r in zip(tasks, results)]


def sweep_csv(results) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for (kind, D, st, run, seed), stats, _, _ in results:
        m = stats.metrics()
        row = [kind.value, D, st, seed] + [m[c] for c in CSV_COLUMNS[4:]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def summary_rows(results):
    """Aggregate per (policy, D, static) in first-seen order."""
    groups: dict = {}
    for (kind, D, st, run, seed), stats, _, _ in results:
        groups.setdefault((kind.value, D, st), []).append(stats)
    for key, stats in groups.items():
        yield key, aggregate(stats)


def summary_csv(results) -> str:
    lines = ["policy,D,static,runs,metric,mean,std,ci95,ci_defined"]
    for (policy, D, st), summ in summary_rows(results):
        for name, ms in summ.metrics.items():
            lines.append(",".join(_fmt(v) for v in (policy, D, st, summ.n, name, ms.mean, ms.std,
                                                     ms.ci95, int(summ.ci_defined))))
    return "\n".join(lines) + "\n"


def output_paths(out: str) -> dict:
    base = Path(out)
    stem = base.with_suffix("") if base.suffix == ".csv" else base
    return {"csv": base, "summary": Path(f"{stem}.summary.csv"), "config": Path(f"{stem}.config.txt"),
            "traces": Path(f"{stem}.traces")}


def cmd_sweep(cfg: ExperimentConfig, out: str | None, trace: bool) -> int:
    paths = output_paths(out or "sweep.csv")
    _check_writable(paths["csv"])
    results = run_sweep(cfg, trace)
    _write_text(paths["csv"], sweep_csv(results))
    _write_text(paths["summary"], summary_csv(results))
    _write_text(paths["config"], cfg.dump())
    if trace:
        tdir = paths["traces"]
        try:
            tdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create trace directory {tdir}: {exc.strerror}") from exc
        for (kind, D, st, run, seed), _, slots, obstacles in results:
            if slots is None:
                continue
            name = f"{kind.value}_D{D}_S{st}_run{run}"
            _write_text(tdir / f"{name}.slots.csv", SLOT_TRACE_HEADER + slots)
            _write_text(tdir / f"{name}.obstacles.csv", OBSTACLE_TRACE_HEADER + obstacles)
    sys.stdout.write(f"wrote {len(results)} rows to {paths['csv']} "
                     f"(runs={cfg['runs']} per point, summary in {paths['summary']})\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(cfg: ExperimentConfig, out: str | None) -> int:
    results = checks.run_suite(cfg["seed"], fault=cfg["oracle_fault"], scale=cfg["oracle_scale"])
    report = "".join(r.line() + "\n" for r in results)
    failed = [r.name for r in results if not r.passed]
    report += f"{len(results) - len(failed)}/{len(results)} checks passed\n"
    sys.stdout.write(report)
    if out:
        _write_text(out, report)
    return EXIT_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------------------

def _check_writable(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write output {path}: directory missing or not writable")


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="python -m mmrelay",
                                 description="Relay selection under blockage: solve, simulate, verify.")
    ap.add_argument("command", choices=("solve", "sweep", "oracle"))
    ap.add_argument("--config", metavar="PATH", help="key = value config file")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                    help="override one config key (repeatable)")
    ap.add_argument("--out", metavar="PATH", help="output file")
    ap.add_argument("--trace", action="store_true", help="write per-slot and obstacle traces (sweep)")
    ap.add_argument("--jobs", type=int, metavar="INT", help="worker processes (sweep)")
    ap.add_argument("--seed", type=int, metavar="UINT64", help="root seed")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:          # argparse reports usage errors with status 2 already
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args.overrides, seed=args.seed, jobs=args.jobs)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.trace)
        return cmd_oracle(cfg, args.out)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
