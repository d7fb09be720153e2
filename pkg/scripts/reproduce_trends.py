#!/usr/bin/env python3
"""Run the four desk-scale sweeps and print the average miss rate tables.

Writes one CSV per sweep into --outdir (default: results/) through the same
code path as ``mimoauth sweep``. Expect a couple of minutes on one core.
"""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from mimoauth.cli import cmd_sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SWEEPS = ["desk_tones.ini", "desk_receivers.ini", "desk_bandwidth.ini", "desk_narrowband.ini"]


def print_table(path):
    rows = list(csv.DictReader(open(path)))
    labels = list(dict.fromkeys(r["config_label"] for r in rows))
    values = list(dict.fromkeys(r["value"] for r in rows))
    beta = {(r["value"], r["config_label"]): float(r["avg_miss_rate"]) for r in rows}
    print(f"\n{rows[0]['param']:>12} " + " ".join(f"{lab:>11}" for lab in labels))
    for v in values:
        cells = [f"{beta[(v, lab)]:11.4g}" if (v, lab) in beta else " " * 11 for lab in labels]
        print(f"{float(v):12.6g} " + " ".join(cells))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--only", choices=SWEEPS, action="append")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    os.makedirs(args.outdir, exist_ok=True)
    for name in args.only or SWEEPS:
        out = os.path.join(args.outdir, name.replace(".ini", ".csv"))
        code = cmd_sweep(str(CONFIGS / name), out, seed=0, workers=args.workers)
        if code:
            return code
        print_table(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
