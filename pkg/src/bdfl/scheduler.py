"""Virtual-queue scheduling: closed-form frequency solvers, prefix-group client
selection, the alternating DRC-BDFL round solver and three baseline schedulers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import phys
from .errors import BDFLError, InfeasibleClientError, RoundInfeasibleError
from .phys import ClientCost, ClientProfile, ChannelRealization, MiningParams
from .topology import CONNECTIVITY_TOL, algebraic_connectivity, induced_topology

log = logging.getLogger(__name__)

ENERGY_SLACK = 1e-9
# sweeps of the joint frequency solve stop below this relative change
FREQ_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SchedulerConfig:
    tradeoff_v: float = 50.0
    min_clients: int = 3
    max_clients: int | None = None
    f_min: float = 1e8
    f_max: float = 5e9
    inner_max_iters: int = 50
    inner_tolerance: float = 1e-6
    local_iters: int = 20

    def __post_init__(self):
        if self.tradeoff_v < 0:
            raise ValueError("tradeoff_v must be non-negative")
        if self.min_clients < 1:
            raise ValueError("min_clients must be >= 1")
        if self.max_clients is not None and self.max_clients < self.min_clients:
            raise ValueError("max_clients must be >= min_clients")
        if not 0 < self.f_min <= self.f_max:
            raise ValueError("need 0 < f_min <= f_max")
        if self.inner_max_iters < 1 or self.local_iters < 1:
            raise ValueError("inner_max_iters and local_iters must be >= 1")


@dataclass(frozen=True)
class QueueState:
    backlog: np.ndarray

    def __post_init__(self):
        b = np.array(self.backlog, dtype=float)
        if np.any(b < 0):
            raise ValueError("virtual queue backlog must be non-negative")
        b.setflags(write=False)
        object.__setattr__(self, "backlog", b)

    @classmethod
    def zeros(cls, n: int) -> "QueueState":
        return cls(np.zeros(n))


@dataclass
class RoundDecision:
    selected: frozenset
    cpu_freq: np.ndarray
    mining_freq: np.ndarray
    objective_value: float = math.nan
    inner_iterations: int = 0
    converged: bool = True
    infeasible: frozenset = field(default_factory=frozenset)


def indicator(selected, n: int) -> np.ndarray:
    g = np.zeros(n)
    g[list(selected)] = 1.0
    return g


def queue_update(q: QueueState, beta, selected) -> QueueState:
    z = q.backlog
    return QueueState(np.maximum(z + np.asarray(beta, dtype=float) - indicator(selected, len(z)), 0.0))


def drift_plus_penalty(q: QueueState | np.ndarray, beta, selected, round_delay: float, v: float) -> float:
    """Queue drift term sum_i Z_i (beta_i - Gamma_i) plus V times the round delay."""
    if round_delay < 0:
        raise ValueError("round delay must be non-negative")
    z = q.backlog if isinstance(q, QueueState) else np.asarray(q, dtype=float)
    drift = float(np.dot(z, np.asarray(beta, dtype=float) - indicator(selected, len(z))))
    return drift + v * round_delay


# -- CPU frequency -------------------------------------------------------------

def cpu_freq_unclamped(p: ClientProfile, rate: float, f_bloc: float, d_bloc: float, local_iters: int) -> float:
    """Energy-tight CPU frequency, before applying hardware bounds.

    Training delay falls with f while energy rises, so the best feasible f
    spends the whole budget left after upload and mining.
    """
    residual = p.energy_budget - phys.upload_energy(p, rate) - phys.mining_energy(p, d_bloc, f_bloc)
    if residual <= 0:
        raise InfeasibleClientError(p.id, f"no energy left for training (residual {residual:.3g} J)")
    return math.sqrt(2 * residual / (p.switched_capacitance * local_iters * p.cycles_per_round))


def solve_cpu_freq(p: ClientProfile, rate: float, f_bloc: float, d_bloc: float, local_iters: int,
                   f_min: float = 1e8, f_max: float = 5e9) -> float:
    f = cpu_freq_unclamped(p, rate, f_bloc, d_bloc, local_iters)
    if f < f_min:
        # raising f to the floor would break the energy budget
        raise InfeasibleClientError(p.id, f"affordable cpu frequency {f:.3g} Hz is below f_min")
    return min(f, f_max)


# -- mining frequency ----------------------------------------------------------

def cubic_positive_root(M: float, N: float) -> float:
    """Positive real root of f^3 - M f - M N = 0 for M > 0, N >= 0.

    Descartes' rule gives exactly one positive root. Cardano's formula when the
    discriminant is non-negative, otherwise the trigonometric form (largest of
    three real roots), followed by Newton polishing.
    """
    if not M > 0 or N < 0:
        raise ValueError(f"need M > 0 and N >= 0, got M={M}, N={N}")
    if N == 0:
        return math.sqrt(M)
    half_q = M * N / 2
    disc = half_q * half_q - (M / 3) ** 3
    if disc >= 0:
        s = math.sqrt(disc)
        f = float(np.cbrt(half_q + s) + np.cbrt(half_q - s))
    else:
        r = math.sqrt(M / 3)
        arg = min(1.0, max(-1.0, half_q / r**3))
        f = 2 * r * math.cos(math.acos(arg) / 3)
    for _ in range(3):
        g = f**3 - M * f - M * N
        dg = 3 * f * f - M
        if dg <= 0:
            break
        step = g / dg
        f -= step
        if abs(step) <= 1e-15 * f:
            break
    if not f > 0:
        raise BDFLError(f"cubic solver found no positive root for M={M}, N={N}")
    return f


def mining_cubic_coeff(p: ClientProfile, rate: float | None, f_cpu: float | None, mp: MiningParams,
                       local_iters: int) -> float:
    """M = 2 * residual energy / (chi * (-alpha ln(1 - p0))).

    ``rate``/``f_cpu`` of ``None`` mean the client does not train this round and
    spends nothing on upload or computation.
    """
    residual = p.energy_budget
    if rate is not None:
        residual -= phys.upload_energy(p, rate)
    if f_cpu is not None:
        residual -= phys.compute_energy(p, local_iters, f_cpu)
    if residual <= 0:
        raise InfeasibleClientError(p.id, f"no energy left for mining (residual {residual:.3g} J)")
    return 2 * residual / (p.switched_capacitance * mp.quantile_cycles)


def solve_mining_freq(p: ClientProfile, rate: float | None, f_cpu: float | None, others_sum: float,
                      mp: MiningParams, local_iters: int, f_min: float = 1e8, f_max: float = 5e9) -> float:
    """Energy-tight mining frequency given the other clients' total ``others_sum``.

    With block time K / (f + N), spending the residual budget R exactly gives
    chi K f^3 / (2 (f + N)) = R, i.e. the depressed cubic f^3 - M f - M N = 0.
    """
    if others_sum < 0:
        raise ValueError("others_sum must be non-negative")
    M = mining_cubic_coeff(p, rate, f_cpu, mp, local_iters)
    f = cubic_positive_root(M, others_sum)
    if f < f_min:
        raise InfeasibleClientError(p.id, f"affordable mining frequency {f:.3g} Hz is below f_min")
    return min(f, f_max)


# -- client selection ----------------------------------------------------------

def sort_candidates(delays: dict, backlog) -> list[int]:
    z = np.asarray(backlog, dtype=float)
    return sorted(delays, key=lambda i: (delays[i], -z[i], i))


def select_clients(delays: dict, q: QueueState | np.ndarray, beta, v: float, d_bloc: float,
                   m: int, max_clients: int | None = None) -> tuple[frozenset, float]:
    """Pick the sorted-by-delay prefix group of size m..U with the lowest objective.

    ``delays`` maps each schedulable client to its d_up + d_cp. Ties between
    groups go to the smaller group.
    """
    z = q.backlog if isinstance(q, QueueState) else np.asarray(q, dtype=float)
    order = sort_candidates(delays, z)
    if len(order) < m:
        raise RoundInfeasibleError(f"only {len(order)} schedulable clients, need {m}")
    top = len(order) if max_clients is None else min(max_clients, len(order))
    best, best_val = None, math.inf
    for k in range(m, top + 1):
        group = order[:k]
        val = drift_plus_penalty(z, beta, group, delays[group[-1]] + d_bloc, v)
        if val < best_val:
            best, best_val = group, val
    return frozenset(best), best_val


def group_objective(delays: dict, z, beta, v: float, d_bloc: float, group) -> float:
    return drift_plus_penalty(z, beta, group, max(delays[i] for i in group) + d_bloc, v)


# -- round evaluation ----------------------------------------------------------

def evaluate_round(profiles, channel: ChannelRealization, selected, cpu_freq, mining_freq,
                   local_iters: int, mp: MiningParams, d_bloc: float | None = None):
    """Per-client costs, block time and round delay for a fixed decision."""
    if d_bloc is None:
        d_bloc = phys.mining_delay(mp, mining_freq)
    costs = []
    for p in profiles:
        c = ClientCost(e_bloc=phys.mining_energy(p, d_bloc, float(mining_freq[p.id])))
        if p.id in selected:
            rate = float(channel.uplink_rate[p.id])
            c.d_up = phys.upload_delay(p, rate)
            c.e_up = phys.upload_energy(p, rate)
            c.d_cp = phys.compute_delay(p, local_iters, float(cpu_freq[p.id]))
            c.e_cp = phys.compute_energy(p, local_iters, float(cpu_freq[p.id]))
        costs.append(c)
    delay = phys.round_delay(selected, {i: (costs[i].d_up, costs[i].d_cp) for i in selected}, d_bloc)
    return costs, d_bloc, delay


def check_constraints(profiles, selected, costs, m: int, max_clients: int | None = None) -> None:
    """Raise if connectivity, group size or any energy budget is violated."""
    U = len(profiles)
    hi = U if max_clients is None else max_clients
    if not m <= len(selected) <= hi:
        raise BDFLError(f"group size violated: |S|={len(selected)} not in [{m}, {hi}]")
    lam2 = algebraic_connectivity(induced_topology(selected, U))
    if U > 1 and not lam2 > CONNECTIVITY_TOL:
        raise BDFLError(f"connectivity violated: lambda2={lam2}")
    for p, c in zip(profiles, costs):
        if c.energy > p.energy_budget + ENERGY_SLACK:
            raise BDFLError(f"energy budget violated for client {p.id}: {c.energy} > {p.energy_budget}")


# -- DRC-BDFL ------------------------------------------------------------------

def drc_bdfl_round(profiles, channel: ChannelRealization, q: QueueState, beta, cfg: SchedulerConfig,
                   mp: MiningParams, cpu_freq, mining_freq, start=None) -> RoundDecision:
    """Alternate frequency solves and client selection until the set settles.

    ``cpu_freq``/``mining_freq`` are the frequencies carried over from the
    previous round; they seed the first iteration and are not modified. The
    client set starts from everyone unless ``start`` is given.
    """
    U = len(profiles)
    H = cfg.local_iters
    f = np.array(cpu_freq, dtype=float)
    fb = np.array(mining_freq, dtype=float)
    rates = channel.uplink_rate
    S = frozenset(range(U)) if start is None else frozenset(start)
    seen = [S]
    converged = False
    obj = math.nan
    blocked = frozenset()
    n = 0
    for n in range(1, cfg.inner_max_iters + 1):
        f_old, fb_old = f.copy(), fb.copy()
        f, fb, cpu_ok, schedulable = _solve_frequencies(profiles, rates, S, f, fb, cfg, mp)
        d_bloc = phys.mining_delay(mp, fb)

        delays = {i: phys.upload_delay(profiles[i], float(rates[i]))
                  + phys.compute_delay(profiles[i], H, f[i]) for i in schedulable}
        blocked = frozenset(range(U)) - frozenset(schedulable)
        S_new, obj = select_clients(delays, q, beta, cfg.tradeoff_v, d_bloc, cfg.min_clients, cfg.max_clients)

        if S_new == S:
            converged = True
            break
        change = max(_rel_change(f, f_old), _rel_change(fb, fb_old))
        S = S_new
        if change < cfg.inner_tolerance and S_new in seen:
            # oscillation between groups under frozen frequencies
            converged = True
            break
        seen.append(S_new)

    if not converged:
        log.warning("inner loop hit K_max=%d without a stable client set", cfg.inner_max_iters)

    # re-tighten trainers' cpu budgets against the final block time
    d_bloc = phys.mining_delay(mp, fb)
    for i in S:
        f[i] = solve_cpu_freq(profiles[i], float(rates[i]), fb[i], d_bloc, H, cfg.f_min, cfg.f_max)

    return RoundDecision(S, f, fb, obj, n, converged, blocked)


def _solve_frequencies(profiles, rates, S, f, fb, cfg: SchedulerConfig, mp: MiningParams):
    """Jacobi fixed point of the cpu and mining frequencies for a fixed client set.

    Every client reacts to the previous sweep's frequencies, so identical
    clients stay identical. Stops once no frequency moves by more than
    ``FREQ_TOLERANCE`` relative, or after ``inner_max_iters`` sweeps.
    """
    H = cfg.local_iters
    f, fb = f.copy(), fb.copy()
    for _ in range(cfg.inner_max_iters):
        d_bloc = phys.mining_delay(mp, fb)
        f_new = f.copy()
        cpu_ok = set()
        for p in profiles:
            i = p.id
            if rates[i] <= 0:
                continue
            try:
                f_new[i] = solve_cpu_freq(p, float(rates[i]), fb[i], d_bloc, H, cfg.f_min, cfg.f_max)
                cpu_ok.add(i)
            except InfeasibleClientError:
                pass

        schedulable = set(cpu_ok)
        fb_new = fb.copy()
        total = float(fb.sum())
        for p in profiles:
            i = p.id
            others = total - float(fb[i])
            if i in S and i in cpu_ok:
                try:
                    fb_new[i] = solve_mining_freq(p, float(rates[i]), f_new[i], others, mp, H, cfg.f_min, cfg.f_max)
                    continue
                except InfeasibleClientError:
                    schedulable.discard(i)
            try:
                fb_new[i] = solve_mining_freq(p, None, None, others, mp, H, cfg.f_min, cfg.f_max)
            except InfeasibleClientError:
                fb_new[i] = 0.0  # cannot afford to mine at all this round
        if not fb_new.sum() > 0:
            raise RoundInfeasibleError("no client can afford to mine")
        change = max(_rel_change(f_new, f), _rel_change(fb_new, fb))
        f, fb = f_new, fb_new
        if change < FREQ_TOLERANCE:
            break
    return f, fb, cpu_ok, schedulable


def _rel_change(new, old) -> float:
    scale = np.maximum(np.abs(old), 1e-300)
    return float(np.max(np.abs(new - old) / scale))


# -- baselines -----------------------------------------------------------------

def baseline_random(rng: np.random.Generator, k: int, U: int) -> frozenset:
    _check_k(k, U)
    return frozenset(int(i) for i in rng.choice(U, size=k, replace=False))


def baseline_round_robin(t: int, k: int, U: int) -> frozenset:
    _check_k(k, U)
    return frozenset((t * k + j) % U for j in range(k))


def baseline_channel_best(channel: ChannelRealization, k: int) -> frozenset:
    h = np.asarray(channel.channel_gain)
    _check_k(k, len(h))
    order = sorted(range(len(h)), key=lambda i: (-h[i], i))
    return frozenset(order[:k])


def _check_k(k: int, U: int) -> None:
    if not 1 <= k <= U:
        raise ValueError(f"need 1 <= k <= U, got k={k}, U={U}")


def fixed_frequency_round(profiles, channel: ChannelRealization, selected, H: int, mp: MiningParams,
                          f_cpu: float, f_bloc: float) -> RoundDecision:
    """Run a baseline's pick at fixed frequencies, dropping clients that would bust their budget."""
    U = len(profiles)
    f = np.full(U, float(f_cpu))
    fb = np.full(U, float(f_bloc))
    d_bloc = phys.mining_delay(mp, fb)
    keep, dropped = set(), set()
    for i in selected:
        p = profiles[i]
        rate = float(channel.uplink_rate[i])
        if rate <= 0:
            dropped.add(i)
            continue
        e = (phys.upload_energy(p, rate) + phys.compute_energy(p, H, f_cpu)
             + phys.mining_energy(p, d_bloc, f_bloc))
        (keep if e <= p.energy_budget else dropped).add(i)
    if not keep:
        raise RoundInfeasibleError("every client picked by the baseline is infeasible")
    return RoundDecision(frozenset(keep), f, fb, math.nan, 0, True, frozenset(dropped))
