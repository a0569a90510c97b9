"""60 GHz zone-to-zone link budget: log-distance path loss, SNR, Shannon rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class RadioParams:
    carrier_freq: float = 60e9     # Hz
    tx_power: float = 24.0         # dBm
    gain_tx: float = 6.0           # dB
    gain_rx: float = 6.0           # dB
    ple: float = 2.5               # path-loss exponent
    shadow_sigma: float = 3.5      # dB
    noise_density: float = -174.0  # dBm/Hz
    bandwidth: float = 20e6        # Hz
    ref_dist: float = 1.0          # m

    def __post_init__(self):
        for name in ("carrier_freq", "bandwidth", "ref_dist"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ple < 2:
            raise ValueError("ple must be >= 2")
        if self.shadow_sigma < 0:
            raise ValueError("shadow_sigma must be non-negative")

    @property
    def noise_dbm(self) -> float:
        return self.noise_density + 10.0 * math.log10(self.bandwidth)

    @property
    def fspl_ref(self) -> float:
        """Free-space loss at the reference distance, dB."""
        return 20.0 * math.log10(4.0 * math.pi * self.ref_dist * self.carrier_freq / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    shadow_draw: float
    rx_power: float   # dBm
    snr: float        # linear
    capacity: float   # bit/s


def path_loss_db(d, p: RadioParams):
    """Log-distance path loss with a free-space intercept at ``ref_dist``."""
    if np.ndim(d) == 0:
        d = float(d)
        if not d > 0:
            raise ValueError("distance must be positive")
        return p.fspl_ref + 10.0 * p.ple * math.log10(d / p.ref_dist)
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    return p.fspl_ref + 10.0 * p.ple * np.log10(d / p.ref_dist)


def rx_power_dbm(d, shadow_draw, p: RadioParams):
    return p.tx_power + p.gain_tx + p.gain_rx - path_loss_db(d, p) + shadow_draw


def capacity_from_rx(rx_dbm, p: RadioParams):
    """Shannon rate B log2(1 + SNR) for a received power in dBm."""
    if np.ndim(rx_dbm) == 0:
        return p.bandwidth * math.log2(1.0 + 10.0 ** ((float(rx_dbm) - p.noise_dbm) / 10.0))
    snr = 10.0 ** ((np.asarray(rx_dbm, dtype=float) - p.noise_dbm) / 10.0)
    return p.bandwidth * np.log2(1.0 + snr)


def link_budget(d: float, shadow_draw: float, p: RadioParams) -> LinkBudget:
    rx = rx_power_dbm(d, shadow_draw, p)
    snr = 10.0 ** ((rx - p.noise_dbm) / 10.0)
    return LinkBudget(float(d), float(shadow_draw), float(rx), float(snr),
                      float(p.bandwidth * math.log2(1.0 + snr)))


def shannon_capacity(snr: float, bandwidth: float) -> float:
    return bandwidth * math.log2(1.0 + max(snr, 0.0))


def required_rate(packet_bytes: int, slot: float) -> float:
    """Rate needed to push one packet through one slot, bit/s."""
    if not slot > 0:
        raise ValueError("slot must be positive")
    return 8.0 * packet_bytes / slot


def slot_supports_packet(lb: LinkBudget, packet_bytes: int, slot: float) -> bool:
    return lb.capacity * slot >= 8.0 * packet_bytes
