"""Simulator for blockchain-aided decentralized federated learning over wireless links."""

from .config import SimConfig, load_config
from .harness import compare_baselines, run_simulation, sweep_v

__all__ = ["SimConfig", "load_config", "run_simulation", "sweep_v", "compare_baselines"]
__version__ = "0.1.0"
