#!/usr/bin/env python3
"""Sweep profile classification over window lengths and seeds.

Each run simulates a three-class cohort, trains the random-kernel
classifier on 20 s windows of the interpolated streams, and compares
per-window accuracy with the fused per-journey accuracy after the
sequence filter. Longer windows see more of each journey but yield
fewer training examples; the sweep shows that trade-off.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from driveload.experiments import run_profiling_trial


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5, help="number of seeds (from 0)")
    ap.add_argument(
        "--lengths",
        type=int,
        nargs="+",
        default=[100, 200, 400, 800],
        help="window lengths in 20 Hz grid samples",
    )
    ap.add_argument("--n-features", type=int, default=600)
    ap.add_argument("--duration", type=float, default=450.0, help="journey length, seconds")
    ap.add_argument("--csv", default=None, help="optional CSV output path")
    args = ap.parse_args()

    rows = []
    print(f"{'length':>6} {'seed':>4} {'window_acc':>10} {'fused_acc':>9} "
          f"{'window_f1':>9} {'fused_f1':>8}")
    for length in args.lengths:
        for seed in range(args.seeds):
            r = run_profiling_trial(
                seed,
                length=length,
                n_features=args.n_features,
                duration_s=args.duration,
            )
            rows.append(
                (length, seed, r.window_accuracy, r.fused_accuracy,
                 r.window_macro_f1, r.fused_macro_f1)
            )
            print(f"{length:>6} {seed:>4} {r.window_accuracy:>10.4f} "
                  f"{r.fused_accuracy:>9.4f} {r.window_macro_f1:>9.4f} "
                  f"{r.fused_macro_f1:>8.4f}")

    print()
    for length in args.lengths:
        sel = [r for r in rows if r[0] == length]
        w = np.mean([r[2] for r in sel])
        f = np.mean([r[3] for r in sel])
        improved = sum(1 for r in sel if r[3] >= r[2])
        print(f"length {length:>4}: mean window {w:.4f}, mean fused {f:.4f}, "
              f"fused >= window on {improved}/{len(sel)} seeds")

    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["length", "seed", "window_accuracy", "fused_accuracy",
                        "window_macro_f1", "fused_macro_f1"])
            w.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
