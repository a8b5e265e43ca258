"""Mean virtual-queue backlog per round for several trade-off weights V.

usage: python scripts/v_sweep.py [--values 10,50,100] [--rounds 100] [--out results/v_sweep]
"""
import argparse
import csv
from pathlib import Path

from bdfl import SimConfig, sweep_v
from bdfl.harness import mean_backlog


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--values", default="10,50,100")
    ap.add_argument("--rounds", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/v_sweep")
    args = ap.parse_args()

    values = [float(v) for v in args.values.split(",")]
    runs = sweep_v(SimConfig(rounds=args.rounds, seed=args.seed), values, args.workers)
    traj = {v: mean_backlog(runs[v]) for v in values}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "backlog.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round"] + [f"v{v:g}" for v in values])
        for t in range(args.rounds):
            w.writerow([t] + [f"{traj[v][t]:.6g}" for v in values])
    for v in values:
        z = traj[v]
        print(f"V={v:>6g}  backlog at T/4 {z[len(z) // 4]:.3f}  final {z[-1]:.3f}  "
              f"last-20 mean {z[-20:].mean():.3f}  cumulative delay {runs[v].cumulative_delay():.2f} s")


if __name__ == "__main__":
    main()
