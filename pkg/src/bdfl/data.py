"""Synthetic non-IID client data and label-divergence participation rates."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    owner: int = -1
    # positions in the parent (global) dataset; -1 marks resampled duplicates
    indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must have the same length")

    def __len__(self) -> int:
        return len(self.labels)

    def label_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes)[:num_classes]


@dataclass(frozen=True)
class PartitionSpec:
    num_classes: int
    dirichlet_alpha: float
    samples_per_client: tuple[int, ...]

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if not self.dirichlet_alpha > 0:
            raise ValueError("dirichlet_alpha must be positive")
        if any(n < 1 for n in self.samples_per_client):
            raise ValueError("every client needs at least one sample")

    @property
    def total(self) -> int:
        return int(sum(self.samples_per_client))


def gaussian_mixture(n: int, num_classes: int, dim: int, rng: np.random.Generator,
                     separation: float = 1.0, means: np.ndarray | None = None):
    """Balanced C-class isotropic Gaussian mixture.

    Returns ``(dataset, means)`` so a held-out split can reuse the class means.
    """
    if means is None:
        means = rng.normal(0.0, separation, size=(num_classes, dim))
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    x = means[labels] + rng.normal(size=(n, dim))
    return LabeledDataset(x, labels), means


def partition_dirichlet(global_data: LabeledDataset, spec: PartitionSpec,
                        rng: np.random.Generator) -> list[LabeledDataset]:
    """Split ``global_data`` into per-client shards with Dirichlet label skew.

    Each client draws class proportions from Dir(alpha * 1_C) and fills its quota
    without replacement. When a class pool runs dry the shortfall is taken from
    the classes that still have samples, in order of the client's own
    preference. Only when the whole pool is exhausted are samples drawn with
    replacement (logged).
    """
    C = spec.num_classes
    labels = np.asarray(global_data.labels)
    pools = [list(rng.permutation(np.flatnonzero(labels == c))) for c in range(C)]
    shards = []
    for owner, n_i in enumerate(spec.samples_per_client):
        q = rng.dirichlet(np.full(C, spec.dirichlet_alpha))
        want = rng.multinomial(n_i, q)
        take = np.minimum(want, [len(p) for p in pools])
        short = n_i - int(take.sum())
        for c in np.argsort(-q, kind="stable"):
            if short == 0:
                break
            extra = min(short, len(pools[c]) - int(take[c]))
            take[c] += extra
            short -= extra
        idx = []
        for c in range(C):
            k = int(take[c])
            idx.extend(pools[c][:k])
            pools[c] = pools[c][k:]
        idx = np.array(idx, dtype=int)
        if short > 0:
            log.warning("client %d: global pool exhausted, resampling %d samples with replacement",
                        owner, short)
            refill = rng.choice(len(labels), size=short, replace=True)
            feats = np.concatenate([global_data.features[idx], global_data.features[refill]])
            labs = np.concatenate([labels[idx], labels[refill]])
            idx = np.concatenate([idx, np.full(short, -1)])
        else:
            feats, labs = global_data.features[idx], labels[idx]
        shards.append(LabeledDataset(feats, labs, owner, idx))
    return shards


def divergence_scores(clients, global_label_counts) -> np.ndarray:
    """L1 distance between each client's label proportions and the global ones."""
    g = np.asarray(global_label_counts, dtype=float)
    C = len(g)
    g = g / g.sum()
    return np.array([np.abs(c.label_counts(C) / len(c) - g).sum() for c in clients])


def rates_from_scores(scores, beta_min: float = 0.3, beta_max: float = 0.9,
                      inverted: bool = False) -> np.ndarray:
    """Map divergence scores to participation rates in [beta_min, beta_max].

    Clients closer to the global label mix get the higher rate unless
    ``inverted``. Identical scores all map to ``beta_max``.
    """
    if not 0 < beta_min <= beta_max <= 1:
        raise ValueError("need 0 < beta_min <= beta_max <= 1")
    s = np.asarray(scores, dtype=float)
    top = s.max()
    if top <= 0 or np.ptp(s) == 0:
        return np.full(len(s), beta_max)
    raw = 1.0 - s / top
    raw = (raw - raw.min()) / (raw.max() - raw.min())
    if inverted:
        raw = 1.0 - raw
    return beta_min + (beta_max - beta_min) * raw


def derive_participation_rates(clients, global_label_counts, beta_min: float = 0.3,
                               beta_max: float = 0.9, inverted: bool = False) -> np.ndarray:
    return rates_from_scores(divergence_scores(clients, global_label_counts),
                             beta_min, beta_max, inverted)


def export_partition_csv(shards, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["client_id", "sample_index", "label"])
        for shard in shards:
            idx = shard.indices if shard.indices is not None else np.full(len(shard), -1)
            for j, y in zip(idx, shard.labels):
                w.writerow([shard.owner, int(j), int(y)])
