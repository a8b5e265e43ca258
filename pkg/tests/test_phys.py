import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bdfl import phys
from bdfl.errors import InfeasibleClientError
from bdfl.phys import ChannelParams, ClientProfile, MiningParams

P = ClientProfile(0)  # experiment defaults: phi=5e3, |D|=3e3, chi=1e-28, m=1e6, d=200, P=0.1
CH = ChannelParams()
MP = MiningParams()


def test_compute_delay():
    assert phys.compute_delay(P, 20, 1e9) == pytest.approx(0.3, rel=1e-15)
    assert phys.compute_delay(P, 20, 2e9) == pytest.approx(0.15, rel=1e-15)
    with pytest.raises(ValueError):
        phys.compute_delay(P, 0, 1e9)
    with pytest.raises(ValueError):
        phys.compute_delay(P, 20, 0.0)


def test_compute_energy():
    assert phys.compute_energy(P, 20, 1e9) == pytest.approx(0.015, rel=1e-12)
    assert phys.compute_energy(P, 20, 2e9) == pytest.approx(4 * phys.compute_energy(P, 20, 1e9))
    with pytest.raises(ValueError):
        phys.compute_energy(P, 20, 0.0)


def test_channel_without_fading():
    ch = phys.draw_channel(ChannelParams(fading="none"), [P], np.random.default_rng(0))
    assert ch.channel_gain[0] == pytest.approx(2.5e-8, rel=1e-12)
    snr = P.tx_power * ch.channel_gain[0] / (CH.bandwidth * CH.noise_psd)
    assert snr == pytest.approx(138.888888889, rel=1e-9)
    assert ch.uplink_rate[0] == pytest.approx(1.283e6, rel=1e-3)


def test_dead_channel_is_unusable():
    ch = phys.realize_channel(CH, [P], [0.0])
    assert ch.uplink_rate[0] == 0.0 and not ch.usable(0)
    with pytest.raises(InfeasibleClientError):
        phys.upload_delay(P, ch.uplink_rate[0])


def test_fading_is_unit_mean():
    ch = phys.draw_channel(CH, [P] * 100_000, np.random.default_rng(7))
    assert ch.small_scale_gain.mean() == pytest.approx(1.0, abs=0.02)


def test_upload_delay_and_energy():
    rate = 1.283e6
    assert phys.upload_delay(P, rate) == pytest.approx(0.7794, abs=1e-4)
    assert phys.upload_energy(P, rate) == pytest.approx(0.07794, abs=1e-5)
    assert phys.upload_delay(ClientProfile(1, model_bits=0.0), rate) == 0.0
    assert phys.upload_energy(ClientProfile(1, tx_power=0.0), rate) == 0.0
    assert phys.upload_delay(P, 1e300) < 1e-290
    big = ClientProfile(2, model_bits=3e6)
    assert phys.upload_energy(big, rate) == pytest.approx(3 * phys.upload_energy(P, rate))


def test_mining_delay():
    freqs = [1.5e9] * 8
    assert phys.mining_delay(MP, freqs) == pytest.approx(2.5e-13, rel=1e-9)
    assert phys.mining_delay(MP, [3e9] * 8) == pytest.approx(phys.mining_delay(MP, freqs) / 2)
    with pytest.raises(ValueError):
        phys.mining_delay(MP, [0.0, 0.0])


def test_stochastic_mining_matches_exponential():
    freqs = [1.5e9] * 8
    theta = phys.mean_mining_delay(MP, freqs)
    rng = np.random.default_rng(3)
    samples = np.array([phys.sample_mining_delay(MP, freqs, rng) for _ in range(100_000)])
    assert samples.mean() == pytest.approx(theta, rel=0.02)
    ks = stats.kstest(samples, lambda d: 1 - np.exp(-d / theta)).statistic
    assert ks < 0.01


def test_mining_energy():
    assert phys.mining_energy(P, 2.5e-13, 0.0) == 0.0
    assert phys.mining_energy(P, 2.5e-13, 1.5e9) == pytest.approx(4.21875e-14, rel=1e-12)
    assert phys.mining_energy(P, 1.0, 2e9) == pytest.approx(8 * phys.mining_energy(P, 1.0, 1e9))


def test_round_delay():
    delays = {0: (0.4, 0.6), 1: (1.5, 0.5)}
    assert phys.round_delay({0, 1}, delays, 0.1) == pytest.approx(2.1)
    assert phys.round_delay({0}, delays, 0.1) == pytest.approx(1.1)
    assert phys.round_delay([1, 0], delays, 0.1) == phys.round_delay([0, 1], delays, 0.1)
    with pytest.raises(ValueError):
        phys.round_delay(set(), delays, 0.1)


def test_round_energy():
    assert phys.round_energy(0.078, 0.015, 4e-14) == pytest.approx(0.093)
    assert phys.round_energy(0.0, 0.0, 0.0) == 0.0


@given(st.floats(1e7, 1e10), st.integers(1, 50), st.integers(1, 10_000))
def test_compute_delay_times_freq_is_cycles(f, H, size):
    p = ClientProfile(0, dataset_size=size)
    assert phys.compute_delay(p, H, f) * f == pytest.approx(p.cycles_per_sample * H * size, rel=2**-51)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=6), st.integers(0, 5), st.floats(0, 1), st.floats(0, 1))
def test_round_delay_monotone(ds, k, bump, d_bloc):
    k = k % len(ds)
    per = {i: (d, 0.0) for i, d in enumerate(ds)}
    base = phys.round_delay(per.keys(), per, d_bloc)
    per2 = dict(per)
    per2[k] = (ds[k] + bump, 0.0)
    assert phys.round_delay(per2.keys(), per2, d_bloc) >= base
    assert phys.round_delay(per.keys(), per, d_bloc + bump) >= base
    assert math.isfinite(base) and base >= 0
