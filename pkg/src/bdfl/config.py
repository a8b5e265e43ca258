"""Simulation configuration with experiment defaults and strict file loading."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np
import yaml

from .errors import ConfigError

SCHEDULERS = ("drc_bdfl", "random", "round_robin", "channel_best")
MINING_MODES = ("deterministic", "stochastic")
STREAMS = ("data", "partition", "channel", "scheduler", "mining", "training")


@dataclass(frozen=True)
class SimConfig:
    # system
    clients: int = 8
    rounds: int = 100
    min_clients: int = 3
    tradeoff_v: float = 50.0
    energy_budget: float = 0.4
    # channel
    bandwidth: float = 180e3
    noise_psd: float = 1e-16
    path_loss_const: float = 1e-3
    ref_distance: float = 1.0
    path_loss_exponent: float = 2.0
    distance: float = 200.0
    tx_power: float = 0.1
    fading: str = "rayleigh"
    # computation / learning
    cycles_per_sample: float = 5e3
    switched_capacitance: float = 1e-28
    dataset_size: int = 3000
    model_bits: float = 1e6
    local_iters: int = 20
    learning_rate: float = 0.01
    batch_size: int = 32
    l2: float = 1e-3
    num_classes: int = 4
    feature_dim: int = 16
    class_separation: float = 0.5
    test_fraction: float = 0.2
    # mining
    difficulty: float = 3e7
    quantile_prob: float = 1e-10
    mining_mode: str = "deterministic"
    # frequencies
    f_init: float = 1e9
    f_bloc_init: float = 1.5e9
    f_min: float = 1e8
    f_max: float = 5e9
    # participation
    dirichlet_alpha: float = 0.5
    beta_min: float = 0.3
    beta_max: float = 0.9
    beta_inverted: bool = False
    # scheduling
    scheduler: str = "drc_bdfl"
    baseline_clients: int = 0  # 0: enough clients to cover sum(beta)
    inner_max_iters: int = 50
    inner_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.clients < 1 or self.rounds < 0:
            raise ConfigError("clients must be >= 1 and rounds >= 0")
        if not 1 <= self.min_clients <= self.clients:
            raise ConfigError(f"min_clients must be in [1, clients], got {self.min_clients}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"scheduler must be one of {SCHEDULERS}, got {self.scheduler!r}")
        if self.mining_mode not in MINING_MODES:
            raise ConfigError(f"mining_mode must be one of {MINING_MODES}, got {self.mining_mode!r}")
        if self.tradeoff_v < 0:
            raise ConfigError("tradeoff_v must be non-negative")
        if not 0 < self.f_min <= self.f_max:
            raise ConfigError("need 0 < f_min <= f_max")
        if not self.f_min <= self.f_init <= self.f_max or not self.f_min <= self.f_bloc_init <= self.f_max:
            raise ConfigError("initial frequencies must lie within [f_min, f_max]")
        if not 0 < self.beta_min <= self.beta_max <= 1:
            raise ConfigError("need 0 < beta_min <= beta_max <= 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must be in (0, 1)")
        if not 0 <= self.baseline_clients <= self.clients:
            raise ConfigError("baseline_clients must be in [0, clients]")
        for name in ("energy_budget", "learning_rate", "difficulty", "dirichlet_alpha", "dataset_size",
                     "local_iters", "batch_size", "num_classes", "feature_dim", "inner_max_iters"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def with_(self, **kw) -> "SimConfig":
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def rng(self, stream: str) -> np.random.Generator:
        """Independent generator for one named stochastic component."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, STREAMS.index(stream)]))


def from_dict(d: dict | None, base: SimConfig | None = None) -> SimConfig:
    d = dict(d or {})
    known = {f.name: f for f in fields(SimConfig)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    base = base or SimConfig()
    coerced = {}
    for k, v in d.items():
        default = getattr(base, k)
        try:
            if isinstance(default, bool):
                if not isinstance(v, bool):
                    raise TypeError(f"expected a boolean, got {v!r}")
                coerced[k] = v
            elif isinstance(default, int):
                if isinstance(v, bool) or float(v) != int(float(v)):
                    raise TypeError(f"expected an integer, got {v!r}")
                coerced[k] = int(float(v))
            elif isinstance(default, float):
                coerced[k] = float(v)
            else:
                coerced[k] = str(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {exc}") from exc
    return base.with_(**coerced)


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of keys to values")
    return from_dict(data)


def dump_config(cfg: SimConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
