"""Flat ``key = value`` experiment configuration.

A config file holds one ``key = value`` per line; ``#`` starts a comment.
Command-line ``--set key=value`` overrides are applied after the file, in
order. Unknown keys and unparsable values raise :class:`ConfigError`.
The recognised keys, their types and defaults are listed in :data:`KEYS`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Callable

from .policies import PolicyKind
from .pomdp import ChannelParams
from .radio import RadioParams
from .sim import SimConfig


class ConfigError(ValueError):
    """Bad key, bad value, or a value that breaks a model invariant."""


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _policies(text: str) -> tuple[PolicyKind, ...]:
    return tuple(PolicyKind(v.strip()) for v in text.split(",") if v.strip())


def _pair(text: str) -> tuple[int, int]:
    x, y = (int(v) for v in text.split(","))
    return (x, y)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    parse: Callable
    default: str
    help: str


# key -> (parser, default as written in a config file, meaning)
KEYS: dict[str, Key] = {
    # simulation
    "slot": Key(float, "0.1", "slot length in seconds"),
    "slots_per_frame": Key(int, "50", "slots per BS frame, also the decision horizon"),
    "frames": Key(int, "2", "frames per episode"),
    "packet_bytes": Key(int, "65535", "packet size in bytes"),
    "static_count": Key(int, "16", "static obstacles (0..16)"),
    "dynamic_count": Key(int, "0", "moving obstacles"),
    "policy": Key(PolicyKind, "pomdp_finite", "policy for single runs"),
    "blockage_gating": Key(str, "geometric", "geometric or global"),
    "blockage_hold": Key(int, "1", "slots between obstacle moves and blockage redraws"),
    "switch_belief": Key(float, "1.0", "belief assigned to a freshly explored relay"),
    "source": Key(_pair, "0,0", "source zone x,y"),
    "dest": Key(_pair, "9,9", "destination zone x,y"),
    "seed": Key(int, "0", "root seed (unsigned 64-bit)"),
    # channel model
    "q": Key(float, "0.9", "good link stays good"),
    "s": Key(float, "0.1", "bad link turns good"),
    "k": Key(float, "0.8", "ACK probability on a good link"),
    "C": Key(float, "1.0", "cost of a loss or an exploration, in slots"),
    # radio
    "carrier_freq": Key(float, "60e9", "Hz"),
    "tx_power": Key(float, "24", "dBm"),
    "gain_tx": Key(float, "6", "dB"),
    "gain_rx": Key(float, "6", "dB"),
    "ple": Key(float, "2.5", "path-loss exponent"),
    "shadow_sigma": Key(float, "3.5", "shadowing standard deviation, dB"),
    "noise_density": Key(float, "-174", "dBm/Hz"),
    "bandwidth": Key(float, "20e6", "Hz"),
    "ref_dist": Key(float, "1", "path-loss reference distance, m"),
    # sweep
    "sweep_axis": Key(str, "dynamic", "dynamic (vary moving obstacles) or static"),
    "dynamic_counts": Key(_int_list, "0,16,32,48,64", "moving-obstacle counts for a dynamic sweep"),
    "static_counts": Key(_int_list, "0,4,8,12,16", "static-obstacle counts for a static sweep"),
    "policies": Key(_policies, "pomdp_finite,pomdp_stationary,rss,throughput", "policies to compare"),
    "runs": Key(int, "1000", "episodes per sweep point and policy"),
    "jobs": Key(int, "0", "worker processes; 0 means one per CPU"),
    "trace_runs": Key(int, "1", "with --trace, how many runs per point get trace files"),
    # solve
    "tol": Key(float, "1e-9", "convergence tolerance for the stationary threshold"),
    "max_iter": Key(int, "100000", "backup limit for the stationary threshold"),
    # oracle
    "oracle_scale": Key(float, "1.0", "multiplier on the number of parameter sets checked"),
    "oracle_fault": Key(_bool, "0", "run the checks against a deliberately biased backup"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def channel(self) -> ChannelParams:
        v = self.values
        return ChannelParams(v["q"], v["s"], v["k"], v["C"], v["slots_per_frame"])

    @property
    def radio(self) -> RadioParams:
        names = [f.name for f in fields(RadioParams)]
        return RadioParams(**{n: self.values[n] for n in names})

    def sim(self, **overrides) -> SimConfig:
        v = self.values
        base = SimConfig(slot=v["slot"], slots_per_frame=v["slots_per_frame"], frames=v["frames"],
                         packet_bytes=v["packet_bytes"], static_count=v["static_count"],
                         dynamic_count=v["dynamic_count"], policy=v["policy"], q=v["q"], s=v["s"],
                         k=v["k"], C=v["C"], radio=self.radio, seed=v["seed"],
                         blockage_gating=v["blockage_gating"], source=v["source"], dest=v["dest"],
                         switch_belief=v["switch_belief"], blockage_hold=v["blockage_hold"])
        return replace(base, **overrides) if overrides else base

    @property
    def sweep_values(self) -> tuple[int, ...]:
        return self.values["dynamic_counts"] if self.values["sweep_axis"] == "dynamic" \
            else self.values["static_counts"]

    def dump(self) -> str:
        """The resolved config as text that :func:`load_config` reads back."""
        return "".join(f"{k} = {self.raw[k]}\n" for k in KEYS)

    @property
    def raw(self) -> dict:
        return self.values["_raw"]


def parse_lines(text: str, origin: str = "config") -> list[tuple[str, str]]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        out.append((key.strip(), value.strip()))
    return out


def load_config(path: str | os.PathLike | None = None, overrides=(), seed: int | None = None,
                jobs: int | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (``"key=value"``
    strings), then the explicit ``seed``/``jobs`` arguments."""
    raw = {k: key.default for k, key in KEYS.items()}
    pairs = []
    if path is not None:
        try:
            with open(path) as fh:
                pairs += parse_lines(fh.read(), str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    if seed is not None:
        pairs.append(("seed", str(seed)))
    if jobs is not None:
        pairs.append(("jobs", str(jobs)))
    for key, value in pairs:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = value
    values = {}
    for key, text in raw.items():
        try:
            values[key] = KEYS[key].parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc
    values["_raw"] = raw
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    if not 0 <= v["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if v["sweep_axis"] not in ("dynamic", "static"):
        raise ConfigError("sweep_axis must be 'dynamic' or 'static'")
    for key in ("dynamic_counts", "static_counts", "policies"):
        if not v[key]:
            raise ConfigError(f"{key} must not be empty")
    if v["runs"] < 1:
        raise ConfigError("runs must be at least 1")
    if v["jobs"] < 0 or v["trace_runs"] < 0:
        raise ConfigError("jobs and trace_runs must be non-negative")
    if not v["tol"] > 0 or v["max_iter"] < 1:
        raise ConfigError("tol must be positive and max_iter at least 1")
    if not v["oracle_scale"] > 0:
        raise ConfigError("oracle_scale must be positive")
    try:
        cfg.sim()
        for n in v["static_counts"] if v["sweep_axis"] == "static" else ():
            cfg.sim(static_count=n)
        for d in v["dynamic_counts"] if v["sweep_axis"] == "dynamic" else ():
            cfg.sim(dynamic_count=d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
