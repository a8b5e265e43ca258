"""Delay and energy models for local computation, uplink transmission and PoW mining.

Units throughout: seconds, Joules, Hz (cycles/s), bits, Watts, meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleClientError


@dataclass(frozen=True)
class ClientProfile:
    id: int
    dataset_size: int = 3000
    cycles_per_sample: float = 5e3
    switched_capacitance: float = 1e-28
    model_bits: float = 1e6
    distance: float = 200.0
    tx_power: float = 0.1
    energy_budget: float = 0.4
    participation_rate: float = 1.0

    def __post_init__(self):
        if self.dataset_size < 1:
            raise ValueError(f"client {self.id}: dataset_size must be >= 1")
        for name in ("cycles_per_sample", "switched_capacitance", "distance", "energy_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"client {self.id}: {name} must be positive")
        if self.model_bits < 0 or self.tx_power < 0:
            raise ValueError(f"client {self.id}: model_bits and tx_power must be non-negative")
        if not 0 < self.participation_rate <= 1:
            raise ValueError(f"client {self.id}: participation_rate must be in (0, 1]")

    @property
    def cycles_per_round(self) -> float:
        """phi_i * |D_i|, the cycles for one local iteration."""
        return self.cycles_per_sample * self.dataset_size


@dataclass(frozen=True)
class ChannelParams:
    bandwidth: float = 180e3
    noise_psd: float = 1e-16
    path_loss_const: float = 1e-3
    ref_distance: float = 1.0
    path_loss_exponent: float = 2.0
    fading: str = "rayleigh"  # or "none"

    def __post_init__(self):
        for name in ("bandwidth", "noise_psd", "path_loss_const", "ref_distance", "path_loss_exponent"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.fading not in ("rayleigh", "none"):
            raise ValueError(f"unknown fading model {self.fading!r}")


@dataclass(frozen=True)
class ChannelRealization:
    small_scale_gain: np.ndarray
    channel_gain: np.ndarray
    uplink_rate: np.ndarray

    def usable(self, i: int) -> bool:
        return self.uplink_rate[i] > 0


@dataclass(frozen=True)
class MiningParams:
    difficulty: float = 3e7
    quantile_prob: float = 1e-10

    def __post_init__(self):
        if not self.difficulty > 0:
            raise ValueError("difficulty must be positive")
        if not 0 < self.quantile_prob < 1:
            raise ValueError("quantile_prob must be in (0, 1)")

    @property
    def quantile_cycles(self) -> float:
        """-alpha * ln(1 - p0): cycles the whole network must burn for the quantile delay."""
        return -self.difficulty * math.log1p(-self.quantile_prob)


def _check_freq(p: ClientProfile, f: float) -> None:
    if not f > 0:
        raise ValueError(f"client {p.id}: cpu frequency must be positive, got {f}")


def compute_delay(p: ClientProfile, local_iters: int, cpu_freq: float) -> float:
    if local_iters < 1:
        raise ValueError(f"local_iters must be >= 1, got {local_iters}")
    _check_freq(p, cpu_freq)
    return p.cycles_per_sample * local_iters * p.dataset_size / cpu_freq


def compute_energy(p: ClientProfile, local_iters: int, cpu_freq: float) -> float:
    if local_iters < 1:
        raise ValueError(f"local_iters must be >= 1, got {local_iters}")
    _check_freq(p, cpu_freq)
    return p.switched_capacitance * p.cycles_per_sample * local_iters * p.dataset_size * cpu_freq**2 / 2


def channel_gain(params: ChannelParams, p: ClientProfile, small_scale: float) -> float:
    return params.path_loss_const * small_scale * (params.ref_distance / p.distance) ** params.path_loss_exponent


def uplink_rate(params: ChannelParams, p: ClientProfile, gain: float) -> float:
    snr = p.tx_power * gain / (params.bandwidth * params.noise_psd)
    return params.bandwidth * math.log2(1.0 + snr)


def realize_channel(params: ChannelParams, profiles, small_scale) -> ChannelRealization:
    """Build a realization from given small-scale gains (no randomness)."""
    rho = np.asarray(small_scale, dtype=float)
    h = np.array([channel_gain(params, p, r) for p, r in zip(profiles, rho)])
    rate = np.array([uplink_rate(params, p, g) for p, g in zip(profiles, h)])
    for a in (rho, h, rate):
        a.setflags(write=False)
    return ChannelRealization(rho, h, rate)


def draw_channel(params: ChannelParams, profiles, rng: np.random.Generator) -> ChannelRealization:
    if params.fading == "none":
        rho = np.ones(len(profiles))
    else:
        # Rayleigh amplitude fading -> unit-mean exponential power gain
        rho = rng.exponential(1.0, size=len(profiles))
    return realize_channel(params, profiles, rho)


def upload_delay(p: ClientProfile, rate: float) -> float:
    if not rate > 0:
        raise InfeasibleClientError(p.id, f"uplink rate {rate} is not positive")
    return p.model_bits / rate


def upload_energy(p: ClientProfile, rate: float) -> float:
    return p.tx_power * upload_delay(p, rate)


def mining_delay(mp: MiningParams, mining_freqs) -> float:
    total = float(np.sum(mining_freqs))
    if not total > 0:
        raise ValueError("total mining frequency must be positive")
    return mp.quantile_cycles / total


def mean_mining_delay(mp: MiningParams, mining_freqs) -> float:
    """theta(t): mean of the exponential block time."""
    total = float(np.sum(mining_freqs))
    if not total > 0:
        raise ValueError("total mining frequency must be positive")
    return mp.difficulty / total


def sample_mining_delay(mp: MiningParams, mining_freqs, rng: np.random.Generator) -> float:
    return float(rng.exponential(mean_mining_delay(mp, mining_freqs)))


def mining_energy(p: ClientProfile, d_bloc: float, f_bloc: float) -> float:
    if f_bloc < 0 or d_bloc < 0:
        raise ValueError("mining delay and frequency must be non-negative")
    return p.switched_capacitance * d_bloc * f_bloc**3 / 2


def round_delay(selected, per_client_delays, d_bloc: float) -> float:
    """Slowest trainer's upload + compute time, plus the block time.

    ``per_client_delays`` maps client id to ``(d_up, d_cp)``.
    """
    sel = list(selected)
    if not sel:
        raise ValueError("round delay needs at least one selected client")
    return max(sum(per_client_delays[i]) for i in sel) + d_bloc


def round_energy(e_up: float, e_cp: float, e_bloc: float) -> float:
    if min(e_up, e_cp, e_bloc) < 0:
        raise ValueError("energy components must be non-negative")
    return e_up + e_cp + e_bloc


@dataclass
class ClientCost:
    """Delay/energy breakdown of one client in one round."""

    d_up: float = 0.0
    d_cp: float = 0.0
    e_up: float = 0.0
    e_cp: float = 0.0
    e_bloc: float = 0.0

    @property
    def delay(self) -> float:
        return self.d_up + self.d_cp

    @property
    def energy(self) -> float:
        return round_energy(self.e_up, self.e_cp, self.e_bloc)
