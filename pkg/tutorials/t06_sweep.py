"""
Relay policies in a grid with moving obstacles
==============================================

A reduced version of the dynamic-obstacle sweep. The full one is
``python3 -m mmrelay sweep``. The second half repeats it with blockage that
persists for ten slots, where a missed ACK is a much better hint that the
link will stay bad.
"""
from mmrelay.cli import run_sweep, summary_rows
from mmrelay.config import load_config

for hold in (1, 10):
    cfg = load_config(None, ["runs=40", "dynamic_counts=0,32,64", f"blockage_hold={hold}"], jobs=1)
    print(f"\nblockage held for {hold} slot(s)")
    print(f"{'policy':18s}{'D':>4s}{'loss/delivered':>16s}{'delay/packet s':>16s}")
    for (policy, D, static), s in summary_rows(run_sweep(cfg)):
        print(f"{policy:18s}{D:4d}{s['loss_per_delivered'].mean:16.3f}{s['e2e_delay_per_packet_s'].mean:16.3f}")
