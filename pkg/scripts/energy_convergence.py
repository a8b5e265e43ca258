"""Per-client cumulative-average energy and its three components under DRC-BDFL.

usage: python scripts/energy_convergence.py [--budget 0.4] [--out results/energy]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from bdfl import SimConfig, run_simulation

COMPONENTS = ("upload", "compute", "mining")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budget", type=float, default=0.4)
    ap.add_argument("--rounds", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/energy")
    args = ap.parse_args()

    cfg = SimConfig(energy_budget=args.budget, rounds=args.rounds, seed=args.seed)
    res = run_simulation(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"energy_emax{args.budget:g}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["round"]
        for i in range(cfg.clients):
            header += [f"total_{i}"] + [f"{c}_{i}" for c in COMPONENTS]
        w.writerow(header)
        for m in res.metrics:
            row = [m.round]
            for i in range(cfg.clients):
                row += [m.cum_avg_energy[i]] + list(m.cum_avg_components[:, i])
            w.writerow([row[0]] + [f"{x:.6g}" for x in row[1:]])

    final = res.metrics[-1]
    print(f"E_max={args.budget:g} J  final per-client average: "
          + " ".join(f"{e:.4f}" for e in final.cum_avg_energy))
    for k, name in enumerate(COMPONENTS):
        print(f"  {name:>8}: mean over clients {np.nanmean(final.cum_avg_components[k]):.4g} J")


if __name__ == "__main__":
    main()
