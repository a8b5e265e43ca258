"""DRC-BDFL against random, round-robin and channel-best selection over several seeds.

usage: python scripts/delay_comparison.py [--seeds 1..10] [--workers 4] [--out results/compare]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from bdfl import SimConfig, compare_baselines
from bdfl.cli import parse_seeds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", default="1..10")
    ap.add_argument("--rounds", type=int, default=100)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/compare")
    args = ap.parse_args()

    seeds = parse_seeds(args.seeds)
    comp = compare_baselines(SimConfig(rounds=args.rounds), seeds, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedulers = ("drc_bdfl", "random", "round_robin", "channel_best")
    with open(out / "cumulative_delay.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round"] + list(schedulers))
        curves = {s: np.mean([np.cumsum([m.round_delay for m in comp.runs[(s, seed)].metrics])
                              for seed in seeds], axis=0) for s in schedulers}
        for t in range(args.rounds):
            w.writerow([t] + [f"{curves[s][t]:.6g}" for s in schedulers])

    for r in comp.table():
        print(f"{r['scheduler']:>13}: delay {r['cum_delay_mean']:8.2f} +/- {r['cum_delay_std']:.2f} s  "
              f"({r['avg_round_delay']:.3f} s/round)  accuracy {r['accuracy_mean']:.4f}  loss {r['loss_mean']:.4f}")
    best = comp.best_baseline()
    wins = int(np.sum(comp.cumulative_delays("drc_bdfl") < comp.cumulative_delays(best)))
    print(f"reduction vs {best}: {comp.delay_reduction_pct():.2f}%  (lower in {wins}/{len(seeds)} seeds)")


if __name__ == "__main__":
    main()
