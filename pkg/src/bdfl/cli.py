"""Command-line entry point: ``bdfl run | sweep-v | compare | bound | plot-script``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import SimConfig, dump_config, load_config
from .errors import BDFLError, ConfigError, RoundInfeasibleError
from .harness import compare_baselines, convergence_check, emit_metrics, mean_backlog, run_simulation, sweep_v

log = logging.getLogger("bdfl")

PLOT_SCRIPT = '''\
"""Plot cumulative delay and mean virtual-queue backlog from bdfl metrics CSVs.

usage: python plot_metrics.py metrics1.csv [metrics2.csv ...]
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for path in sys.argv[1:]:
    df = pd.read_csv(path)
    label = f"{df.scheduler[0]} seed={df.seed[0]} V={df.v[0]}"
    ax1.plot(df["round"], df["round_delay_s"].cumsum(), label=label)
    z = df[[c for c in df.columns if c.startswith("z_")]].mean(axis=1)
    ax2.plot(df["round"], z, label=label)
ax1.set_xlabel("round"); ax1.set_ylabel("cumulative delay (s)")
ax2.set_xlabel("round"); ax2.set_ylabel("mean virtual queue backlog")
ax1.legend(fontsize=7); ax2.legend(fontsize=7)
fig.tight_layout()
fig.savefig("metrics.png", dpi=150)
'''


def parse_seeds(text: str) -> list[int]:
    """``"1..10"`` (inclusive) or ``"1,4,7"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


def parse_values(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value list {text!r}") from exc


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_(seed=args.seed)
    if getattr(args, "scheduler", None):
        cfg = cfg.with_(scheduler=args.scheduler)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> None:
    cfg = _config(args)
    out = _outdir(args.out)
    result = run_simulation(cfg)
    emit_metrics(result.metrics, out / "metrics.csv", cfg.clients)
    result.ledger.export(out / "ledger.jsonl")
    dump_config(cfg, out / "config.yaml")
    print(f"{cfg.scheduler}: {cfg.rounds} rounds, cumulative delay {result.cumulative_delay():.4f} s")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    values = parse_values(args.values)
    if len(values) < 1:
        raise ConfigError("sweep-v needs at least one V value")
    out = _outdir(args.out)
    results = sweep_v(cfg, values, args.workers)
    for v in sorted(results):
        emit_metrics(results[v].metrics, out / f"metrics_v{v:g}.csv", cfg.clients)
    with open(out / "backlog.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        vs = sorted(results)
        w.writerow(["round"] + [f"v{v:g}" for v in vs])
        traj = {v: mean_backlog(results[v]) for v in vs}
        for t in range(cfg.rounds):
            w.writerow([t] + [repr(float(traj[v][t])) for v in vs])
    for v in sorted(results):
        print(f"V={v:g}: time-averaged mean backlog {mean_backlog(results[v]).mean():.4f}")


def cmd_compare(args) -> None:
    cfg = _config(args)
    seeds = parse_seeds(args.seeds)
    out = _outdir(args.out)
    comp = compare_baselines(cfg, seeds, args.workers)
    for scheduler, seed in sorted(comp.runs):
        emit_metrics(comp.runs[(scheduler, seed)].metrics, out / f"metrics_{scheduler}_seed{seed}.csv", cfg.clients)
    rows = comp.table()
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if not isinstance(v, str) else v) for k, v in r.items()})
    for r in rows:
        print(f"{r['scheduler']:>13}: delay {r['cum_delay_mean']:.3f} +/- {r['cum_delay_std']:.3f} s, "
              f"accuracy {r['accuracy_mean']:.4f}, loss {r['loss_mean']:.4f}")
    print(f"delay reduction vs best baseline ({comp.best_baseline()}): {comp.delay_reduction_pct():.2f}%")


def cmd_bound(args) -> None:
    cfg = _config(args).with_(scheduler="drc_bdfl")
    chk = convergence_check(run_simulation(cfg))
    print(f"bound: {chk['bound']:.6g}")
    print(f"measured avg squared gradient: {chk['measured']:.6g}")
    print("terms: " + ", ".join(f"{x:.6g}" for x in chk["terms"]))
    print(f"L={chk['smoothness']:.6g} G={chk['grad_bound']:.6g} gap={chk['initial_gap']:.6g}")


def cmd_plot_script(args) -> None:
    path = _outdir(args.out) / "plot_metrics.py"
    path.write_text(PLOT_SCRIPT)
    print(path)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bdfl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="YAML config; omitted keys take built-in defaults")
        p.add_argument("--scheduler", choices=["drc_bdfl", "random", "round_robin", "channel_best"])
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("run", help="run one simulation")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-v", help="DRC-BDFL runs over several V values")
    common(p)
    p.add_argument("--values", default="10,50,100")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="DRC-BDFL against the three baselines")
    common(p, seed=False)
    p.add_argument("--seeds", default="1..10")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bound", help="convergence bound vs measured squared gradient")
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("plot-script", help="write a matplotlib script for metrics CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_script)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RoundInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except BDFLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
