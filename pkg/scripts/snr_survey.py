#!/usr/bin/env python3
"""Per-tone SNR distribution over a scenario grid, and the excess loss that
puts its median at a target value."""

import argparse

import numpy as np

from mimoauth.detector import RadioConfig
from mimoauth.experiment import calibrate_excess_loss, desk_scenario, grid_snr_db, full_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", choices=["desk", "full"], default="desk")
    ap.add_argument("--power-mw", type=float, default=0.1)
    ap.add_argument("--target-db", type=float, default=16.0)
    args = ap.parse_args()

    sc = desk_scenario() if args.scenario == "desk" else full_scenario()
    cfg = RadioConfig(tx_power_per_tone_mw=args.power_mw)
    snr = grid_snr_db(sc, cfg)
    q = np.percentile(snr, [0, 10, 50, 90, 100])
    print(f"{args.scenario}: {len(snr)} points, excess loss {sc.building.excess_loss_db} dB")
    print("SNR dB  min {:.1f}  p10 {:.1f}  median {:.1f}  p90 {:.1f}  max {:.1f}".format(*q))
    print(f"excess loss for a {args.target_db} dB median: {calibrate_excess_loss(sc, args.target_db, cfg):.2f} dB")


if __name__ == "__main__":
    main()
