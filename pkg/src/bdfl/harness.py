"""End-to-end simulation runs, V sweeps, baseline comparisons and metric files."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import phys
from .config import SimConfig
from .data import LabeledDataset, PartitionSpec, derive_participation_rates, gaussian_mixture, partition_dirichlet
from .errors import BDFLError, RoundInfeasibleError
from .fl import BoundInputs, Ledger, SoftmaxRegression, aggregate, lemma1_bound, lemma1_terms, local_train, mine_and_append
from .scheduler import (QueueState, RoundDecision, SchedulerConfig, baseline_channel_best, baseline_random,
                        baseline_round_robin, check_constraints, drc_bdfl_round, evaluate_round,
                        fixed_frequency_round, queue_update)
from .topology import CONNECTIVITY_TOL, algebraic_connectivity, induced_topology

log = logging.getLogger(__name__)


@dataclass
class World:
    """Everything fixed for a run: data shards, client profiles and rates."""

    cfg: SimConfig
    profiles: list
    shards: list
    train: LabeledDataset
    test: LabeledDataset
    beta: np.ndarray
    model: SoftmaxRegression

    @property
    def channel_params(self) -> phys.ChannelParams:
        c = self.cfg
        return phys.ChannelParams(c.bandwidth, c.noise_psd, c.path_loss_const, c.ref_distance,
                                  c.path_loss_exponent, c.fading)

    @property
    def mining_params(self) -> phys.MiningParams:
        return phys.MiningParams(self.cfg.difficulty, self.cfg.quantile_prob)

    @property
    def scheduler_config(self) -> SchedulerConfig:
        c = self.cfg
        return SchedulerConfig(c.tradeoff_v, c.min_clients, c.clients, c.f_min, c.f_max,
                               c.inner_max_iters, c.inner_tolerance, c.local_iters)


def build_world(cfg: SimConfig) -> World:
    U = cfg.clients
    n_train = U * cfg.dataset_size
    n_test = int(round(n_train * cfg.test_fraction / (1 - cfg.test_fraction)))
    rng = cfg.rng("data")
    train, means = gaussian_mixture(n_train, cfg.num_classes, cfg.feature_dim, rng, cfg.class_separation)
    test, _ = gaussian_mixture(n_test, cfg.num_classes, cfg.feature_dim, rng, means=means)
    spec = PartitionSpec(cfg.num_classes, cfg.dirichlet_alpha, (cfg.dataset_size,) * U)
    shards = partition_dirichlet(train, spec, cfg.rng("partition"))
    beta = derive_participation_rates(shards, train.label_counts(cfg.num_classes), cfg.beta_min,
                                      cfg.beta_max, cfg.beta_inverted)
    profiles = [phys.ClientProfile(i, len(shards[i]), cfg.cycles_per_sample, cfg.switched_capacitance,
                                   cfg.model_bits, cfg.distance, cfg.tx_power, cfg.energy_budget, float(beta[i]))
                for i in range(U)]
    return World(cfg, profiles, shards, train, test, beta,
                 SoftmaxRegression(cfg.feature_dim, cfg.num_classes, cfg.l2))


@dataclass
class RoundMetrics:
    round: int
    scheduler: str
    seed: int
    v: float
    selected: frozenset
    d_cp: np.ndarray
    d_up: np.ndarray
    e_cp: np.ndarray
    e_up: np.ndarray
    e_bloc: np.ndarray
    z: np.ndarray
    f: np.ndarray
    f_bloc: np.ndarray
    d_bloc: float
    round_delay: float
    cum_avg_delay: float
    cum_avg_energy: np.ndarray
    cum_avg_components: np.ndarray  # rows: e_up, e_cp, e_bloc
    loss: float
    accuracy: float
    inner_iters: int
    miner: int
    converged: bool = True
    grad_sq_norm: float = math.nan
    max_local_grad_norm: float = 0.0

    @property
    def e_total(self) -> np.ndarray:
        return self.e_up + self.e_cp + self.e_bloc


@dataclass
class SimulationResult:
    cfg: SimConfig
    world: World
    metrics: list = field(default_factory=list)
    ledger: Ledger = field(default_factory=Ledger)
    initial_loss: float = math.nan

    @property
    def selected_counts(self) -> list[int]:
        return [len(m.selected) for m in self.metrics]

    def cumulative_delay(self) -> float:
        return float(sum(m.round_delay for m in self.metrics))


def _baseline_k(cfg: SimConfig, beta, t: int, k_schedule) -> int:
    if k_schedule is not None:
        return int(k_schedule[t])
    if cfg.baseline_clients:
        return cfg.baseline_clients
    return max(cfg.min_clients, min(cfg.clients, math.ceil(float(np.sum(beta)))))


def run_simulation(cfg: SimConfig, k_schedule=None, world: World | None = None) -> SimulationResult:
    """Run ``cfg.rounds`` rounds of scheduling, training, aggregation and mining.

    ``k_schedule`` fixes the per-round number of trainers for baseline schedulers
    (used to replay a DRC-BDFL run's group sizes).
    """
    world = world or build_world(cfg)
    profiles, U, H = world.profiles, cfg.clients, cfg.local_iters
    cp, mp, scfg = world.channel_params, world.mining_params, world.scheduler_config
    rng_channel, rng_sched = cfg.rng("channel"), cfg.rng("scheduler")
    rng_mining, rng_train = cfg.rng("mining"), cfg.rng("training")
    if k_schedule is not None and len(k_schedule) < cfg.rounds:
        raise ValueError("k_schedule shorter than the number of rounds")

    model = world.model
    X_all, y_all = world.train.features, world.train.labels
    w = model.init()
    result = SimulationResult(cfg, world, initial_loss=model.loss(w, X_all, y_all))
    queue = QueueState.zeros(U)
    f_carry = np.full(U, cfg.f_init)
    fb_carry = np.full(U, cfg.f_bloc_init)
    delay_sum = 0.0
    trained_rounds = np.zeros(U)
    comp_sums = np.zeros((3, U))

    for t in range(cfg.rounds):
        channel = phys.draw_channel(cp, profiles, rng_channel)
        try:
            decision = _decide(cfg, world, t, channel, queue, f_carry, fb_carry, rng_sched, k_schedule, scfg)
        except RoundInfeasibleError as exc:
            raise RoundInfeasibleError(str(exc), t) from exc
        if cfg.scheduler == "drc_bdfl":
            f_carry, fb_carry = decision.cpu_freq.copy(), decision.mining_freq.copy()
        S = decision.selected

        d_bloc = None
        if cfg.mining_mode == "stochastic":
            d_bloc = phys.sample_mining_delay(mp, decision.mining_freq, rng_mining)
        costs, d_bloc, delay = evaluate_round(profiles, channel, S, decision.cpu_freq, decision.mining_freq,
                                              H, mp, d_bloc)
        if cfg.scheduler == "drc_bdfl" and cfg.mining_mode == "deterministic":
            check_constraints(profiles, S, costs, cfg.min_clients, U)
        lam2 = algebraic_connectivity(induced_topology(S, U))
        if U > 1 and not lam2 > CONNECTIVITY_TOL:
            raise BDFLError(f"round {t}: round topology is disconnected (lambda2={lam2})")

        local = []
        max_g = 0.0
        for i in sorted(S):
            wi, norms = local_train(w, world.shards[i], cfg.learning_rate, H, cfg.batch_size, rng_train, model)
            local.append((wi, len(world.shards[i])))
            max_g = max(max_g, float(norms.max()))
        w = aggregate(local)
        d_comp = delay - d_bloc
        block = mine_and_append(result.ledger, t, w, S, (d_comp, d_bloc), decision.mining_freq, rng_mining)

        queue = queue_update(queue, world.beta, S)
        delay_sum += delay
        gamma = np.zeros(U)
        gamma[list(S)] = 1
        trained_rounds += gamma
        comp = np.array([[c.e_up, c.e_cp, c.e_bloc] for c in costs]).T
        comp_sums += comp * gamma
        with np.errstate(invalid="ignore", divide="ignore"):
            cum_comp = np.where(trained_rounds > 0, comp_sums / np.maximum(trained_rounds, 1), np.nan)

        g = model.grad(w, X_all, y_all)
        result.metrics.append(RoundMetrics(
            round=t, scheduler=cfg.scheduler, seed=cfg.seed, v=cfg.tradeoff_v, selected=S,
            d_cp=np.array([c.d_cp for c in costs]), d_up=np.array([c.d_up for c in costs]),
            e_cp=comp[1].copy(), e_up=comp[0].copy(), e_bloc=comp[2].copy(),
            z=queue.backlog.copy(), f=decision.cpu_freq.copy(), f_bloc=decision.mining_freq.copy(),
            d_bloc=d_bloc, round_delay=delay, cum_avg_delay=delay_sum / (t + 1),
            cum_avg_energy=cum_comp.sum(axis=0), cum_avg_components=cum_comp,
            loss=model.loss(w, X_all, y_all), accuracy=model.accuracy(w, world.test.features, world.test.labels),
            inner_iters=decision.inner_iterations, miner=block.miner, converged=decision.converged,
            grad_sq_norm=float(g @ g), max_local_grad_norm=max_g,
        ))
    return result


def _decide(cfg, world, t, channel, queue, f_carry, fb_carry, rng_sched, k_schedule, scfg) -> RoundDecision:
    profiles, U = world.profiles, cfg.clients
    if cfg.scheduler == "drc_bdfl":
        return drc_bdfl_round(profiles, channel, queue, world.beta, scfg, world.mining_params, f_carry, fb_carry)
    k = _baseline_k(cfg, world.beta, t, k_schedule)
    if cfg.scheduler == "random":
        pick = baseline_random(rng_sched, k, U)
    elif cfg.scheduler == "round_robin":
        pick = baseline_round_robin(t, k, U)
    else:
        pick = baseline_channel_best(channel, k)
    return fixed_frequency_round(profiles, channel, pick, cfg.local_iters, world.mining_params,
                                 cfg.f_init, cfg.f_bloc_init)


# -- sweeps and comparisons ----------------------------------------------------

def _run_job(job):
    cfg, k_schedule = job
    return run_simulation(cfg, k_schedule)


def _map(jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def mean_backlog(result: SimulationResult) -> np.ndarray:
    return np.array([m.z.mean() for m in result.metrics])


def sweep_v(cfg: SimConfig, v_values, workers: int = 1) -> dict:
    """One DRC-BDFL run per V (same seed); returns {V: SimulationResult}."""
    v_values = [float(v) for v in v_values]
    results = _map([(cfg.with_(tradeoff_v=v, scheduler="drc_bdfl"), None) for v in v_values], workers)
    return dict(zip(v_values, results))


BASELINES = ("random", "round_robin", "channel_best")


@dataclass
class Comparison:
    runs: dict  # (scheduler, seed) -> SimulationResult
    seeds: list

    def per_seed(self, scheduler: str, key) -> np.ndarray:
        return np.array([key(self.runs[(scheduler, s)]) for s in self.seeds])

    def cumulative_delays(self, scheduler: str) -> np.ndarray:
        return self.per_seed(scheduler, SimulationResult.cumulative_delay)

    def final_losses(self, scheduler: str) -> np.ndarray:
        return self.per_seed(scheduler, lambda r: r.metrics[-1].loss)

    def final_accuracies(self, scheduler: str) -> np.ndarray:
        return self.per_seed(scheduler, lambda r: r.metrics[-1].accuracy)

    def mean_energy(self, scheduler: str) -> np.ndarray:
        return self.per_seed(scheduler, lambda r: float(np.mean([m.e_total.mean() for m in r.metrics])))

    def best_baseline(self) -> str:
        return min(BASELINES, key=lambda s: self.cumulative_delays(s).mean())

    def delay_reduction_pct(self) -> float:
        best = self.cumulative_delays(self.best_baseline()).mean()
        return 100.0 * (best - self.cumulative_delays("drc_bdfl").mean()) / best

    def table(self) -> list[dict]:
        rows = []
        for s in ("drc_bdfl",) + BASELINES:
            d, a, l, e = (self.cumulative_delays(s), self.final_accuracies(s), self.final_losses(s),
                          self.mean_energy(s))
            rows.append(dict(scheduler=s, cum_delay_mean=d.mean(), cum_delay_std=d.std(),
                             avg_round_delay=d.mean() / max(1, len(self.runs[(s, self.seeds[0])].metrics)),
                             accuracy_mean=a.mean(), accuracy_std=a.std(), loss_mean=l.mean(),
                             loss_std=l.std(), energy_mean=e.mean(), energy_std=e.std()))
        return rows


def compare_baselines(cfg: SimConfig, seeds, workers: int = 1) -> Comparison:
    """DRC-BDFL first, then each baseline replaying its per-round group sizes."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    drc = _map([(cfg.with_(seed=s, scheduler="drc_bdfl"), None) for s in seeds], workers)
    runs = {("drc_bdfl", s): r for s, r in zip(seeds, drc)}
    jobs, keys = [], []
    for s, r in zip(seeds, drc):
        for b in BASELINES:
            jobs.append((cfg.with_(seed=s, scheduler=b), r.selected_counts))
            keys.append((b, s))
    for key, r in zip(keys, _map(jobs, workers)):
        runs[key] = r
    return Comparison(runs, seeds)


def convergence_check(result: SimulationResult) -> dict:
    """Measured average squared global gradient against the bound evaluated on this run."""
    world, cfg = result.world, result.cfg
    ms = result.metrics
    T = len(ms)
    if T == 0:
        raise ValueError("need at least one round")
    measured = float(np.mean([m.grad_sq_norm for m in ms]))
    L = world.model.smoothness(world.train.features)
    G = 1.1 * max(m.max_local_grad_norm for m in ms)
    gap = result.initial_loss - min([result.initial_loss] + [m.loss for m in ms])
    inputs = BoundInputs(cfg.learning_rate, cfg.local_iters, T, L, G, gap, tuple(world.beta),
                         tuple(len(s) for s in world.shards))
    terms = lemma1_terms(inputs)
    return dict(measured=measured, bound=lemma1_bound(inputs), terms=terms, smoothness=L,
                grad_bound=G, initial_gap=gap, rounds=T)


# -- metrics files -------------------------------------------------------------

def metric_columns(U: int) -> list[str]:
    cols = ["round", "scheduler", "seed", "v", "selected_count", "round_delay_s", "cum_avg_delay_s", "d_bloc_s"]
    for i in range(U):
        cols += [f"z_{i}", f"f_{i}_hz", f"f_bloc_{i}_hz", f"e_total_{i}_j"]
    return cols + ["loss", "accuracy", "inner_iters", "selected", "miner"]


def metrics_rows(metrics) -> list[dict]:
    rows = []
    for m in metrics:
        r = dict(round=m.round, scheduler=m.scheduler, seed=m.seed, v=float(m.v), selected_count=len(m.selected),
                 round_delay_s=float(m.round_delay), cum_avg_delay_s=float(m.cum_avg_delay), d_bloc_s=float(m.d_bloc))
        e = m.e_total
        for i in range(len(m.z)):
            r[f"z_{i}"] = float(m.z[i])
            r[f"f_{i}_hz"] = float(m.f[i])
            r[f"f_bloc_{i}_hz"] = float(m.f_bloc[i])
            r[f"e_total_{i}_j"] = float(e[i])
        r.update(loss=float(m.loss), accuracy=float(m.accuracy), inner_iters=int(m.inner_iters),
                 selected=";".join(str(i) for i in sorted(m.selected)), miner=int(m.miner))
        rows.append(r)
    return rows


_INT_COLS = {"round", "seed", "selected_count", "inner_iters", "miner"}
_STR_COLS = {"scheduler", "selected"}


def emit_metrics(metrics, path, num_clients: int | None = None) -> None:
    """Write metrics as CSV; floats use the shortest repr that round-trips."""
    metrics = list(metrics)
    if num_clients is None:
        if not metrics:
            raise ValueError("num_clients is required for an empty metrics list")
        num_clients = len(metrics[0].z)
    cols = metric_columns(num_clients)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in metrics_rows(metrics):
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in _STR_COLS:
                    row[k] = v
                elif k in _INT_COLS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows
