#!/usr/bin/env python3
"""Monte-Carlo false alarm and miss rates next to the analytic ones for a few
pairs, including the S - 1 dof prediction for the false alarm rate."""

import argparse

from mimoauth.detector import RadioConfig, aligned_degrees_of_freedom, degrees_of_freedom, threshold_for_alpha
from mimoauth.experiment import desk_scenario, grid_points, monte_carlo_rates, pair_summary
from mimoauth.numerics import chi2_cdf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--power-mw", type=float, default=10.0)
    ap.add_argument("--n-tx", type=int, default=1)
    ap.add_argument("--n-rx", type=int, default=1)
    ap.add_argument("--tones", type=int, default=1)
    ap.add_argument("--pairs", default="0:80,0:1,8:72,30:31")
    args = ap.parse_args()

    sc = desk_scenario()
    pts = grid_points(sc)
    cfg = RadioConfig(n_tx=args.n_tx, n_rx=args.n_rx, num_tones=args.tones, tx_power_per_tone_mw=args.power_mw)
    k = threshold_for_alpha(cfg.false_alarm_target, degrees_of_freedom(cfg))
    shifted = 1.0 - chi2_cdf(k, aligned_degrees_of_freedom(cfg))
    print(f"S = {degrees_of_freedom(cfg)}, k = {k:.4f}, alpha = {cfg.false_alarm_target}, S-1 dof tail at k = {shifted:.5f}")
    for n, spec in enumerate(args.pairs.split(",")):
        a, b = (int(x) for x in spec.split(":"))
        s = pair_summary(pts[a], pts[b], sc, cfg)
        a_hat, b_hat = monte_carlo_rates(pts[a], pts[b], sc, cfg, args.trials, seed=0, pair_index=n)
        print(f"({a:2d},{b:2d}) mu {s.mu:10.4g}  alpha_hat {a_hat:.5f}  beta {s.beta:.5f}  beta_hat {b_hat:.5f}")


if __name__ == "__main__":
    main()
