import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdfl.data import (LabeledDataset, PartitionSpec, derive_participation_rates, export_partition_csv,
                       gaussian_mixture, partition_dirichlet, rates_from_scores)


def _global(n=24_000, C=4, seed=0):
    data, _ = gaussian_mixture(n, C, 16, np.random.default_rng(seed))
    return data


def _props(shard, C):
    return shard.label_counts(C) / len(shard)


def test_partition_is_set_partition():
    g = _global()
    shards = partition_dirichlet(g, PartitionSpec(4, 0.5, (3000,) * 8), np.random.default_rng(1))
    idx = np.concatenate([s.indices for s in shards])
    assert [len(s) for s in shards] == [3000] * 8
    assert len(np.unique(idx)) == len(idx) == 24_000
    assert np.array_equal(sum(s.label_counts(4) for s in shards), g.label_counts(4))
    for s in shards:
        assert np.array_equal(g.labels[s.indices], s.labels)


def test_large_alpha_matches_global_mix():
    g = _global()
    target = g.label_counts(4) / len(g)
    shards = partition_dirichlet(g, PartitionSpec(4, 1000.0, (3000,) * 8), np.random.default_rng(2))
    assert max(np.abs(_props(s, 4) - target).max() for s in shards) < 0.05


def test_small_alpha_is_skewed():
    g = _global()
    hits = 0
    for seed in range(100):
        shards = partition_dirichlet(g, PartitionSpec(4, 0.3, (3000,) * 8), np.random.default_rng(seed))
        hits += any(_props(s, 4).max() > 0.5 for s in shards)
    assert hits >= 80


def test_single_class_gives_identical_clients_and_uniform_rates():
    g = _global(C=1)
    shards = partition_dirichlet(g, PartitionSpec(1, 0.5, (3000,) * 8), np.random.default_rng(0))
    assert all(np.array_equal(s.label_counts(1), [3000]) for s in shards)
    beta = derive_participation_rates(shards, g.label_counts(1), 0.3, 0.9)
    assert np.all(beta == 0.9)


def test_exhausted_pool_resamples_with_warning(caplog):
    g = _global(n=100)
    with caplog.at_level(logging.WARNING):
        shards = partition_dirichlet(g, PartitionSpec(4, 1.0, (60, 60)), np.random.default_rng(0))
    assert [len(s) for s in shards] == [60, 60]
    assert "with replacement" in caplog.text


def _shard(counts, owner=0):
    labels = np.repeat(np.arange(len(counts)), counts)
    return LabeledDataset(np.zeros((len(labels), 1)), labels, owner)


def test_identical_distributions_get_beta_max():
    a, b = _shard([5, 5]), _shard([10, 10], 1)
    beta = derive_participation_rates([a, b], [15, 15], 0.2, 0.9)
    assert beta.tolist() == [0.9, 0.9]


def test_extremes_of_normalisation():
    a, b = _shard([50, 50]), _shard([100, 0], 1)
    beta = derive_participation_rates([a, b], [150, 50], 0.2, 0.9)
    # global 75/25: a is off by 0.5 in L1, b by 0.5 too -> identical scores
    assert beta.tolist() == [0.9, 0.9]
    beta = derive_participation_rates([a, b], [50, 50], 0.2, 0.9)
    assert beta == pytest.approx([0.9, 0.2], rel=1e-15)


def test_rates_from_scores_example():
    assert rates_from_scores([0.0, 0.5, 1.0], 0.2, 0.9) == pytest.approx([0.9, 0.55, 0.2])
    assert rates_from_scores([0.0, 0.5, 1.0], 0.2, 0.9, inverted=True) == pytest.approx([0.2, 0.55, 0.9])


@given(st.lists(st.floats(0, 2), min_size=2, max_size=10), st.randoms())
def test_rates_bounded_and_permutation_equivariant(scores, rnd):
    beta = rates_from_scores(scores, 0.3, 0.9)
    assert np.all((beta >= 0.3 - 1e-12) & (beta <= 0.9 + 1e-12))
    perm = list(range(len(scores)))
    rnd.shuffle(perm)
    assert np.allclose(rates_from_scores([scores[i] for i in perm], 0.3, 0.9), beta[perm])


def test_export_partition_csv(tmp_path):
    g = _global(n=400)
    shards = partition_dirichlet(g, PartitionSpec(4, 0.5, (100, 100)), np.random.default_rng(0))
    path = tmp_path / "part.csv"
    export_partition_csv(shards, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "client_id,sample_index,label"
    assert len(lines) == 201
