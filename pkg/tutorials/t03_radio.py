"""
Link budget for a 60 GHz hop
============================

Received power follows a log-distance path loss with log-normal shadowing;
a slot can carry a packet when the Shannon capacity times the slot length
covers the packet size.
"""
import numpy as np

from mmrelay import RadioParams, link_budget, slot_supports_packet
from mmrelay.radio import required_rate

radio = RadioParams()
need = required_rate(65535, 0.1)
print(f"a 65535-byte packet in a 0.1 s slot needs {need / 1e6:.2f} Mbit/s")

# Zone centres are 10 m apart; a relay can be up to two rings away.
for cells in (1.0, np.sqrt(2), 2.0, np.sqrt(8)):
    lb = link_budget(10.0 * cells, 0.0, radio)
    print(f"{10 * cells:5.1f} m: rx {lb.rx_power:6.1f} dBm, SNR {10 * np.log10(lb.snr):5.1f} dB, "
          f"capacity {lb.capacity / 1e6:6.1f} Mbit/s")

# How deep a fade the longest hop survives
rng = np.random.default_rng(0)
fades = rng.normal(0.0, radio.shadow_sigma, 2000)
ok = np.mean([slot_supports_packet(link_budget(10 * np.sqrt(8), f, radio), 65535, 0.1) for f in fades])
print(f"share of shadowing draws that still carry a packet on the longest hop: {ok:.3f}")
