"""Receiver BER model tests.

The saddle-point solver is checked against an exact Poisson (+) Gaussian
tail oracle (direct pmf summation against the normal CDF at the solved
threshold), closed-form limits, and frozen regression points; the fading
and ISI averaging against hand-rolled per-pattern/per-node loops.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import norm, poisson

import uwoc_relay_sim as u
from uwoc_relay_sim.constants import (
    BOLTZMANN,
    ELEMENTARY_CHARGE,
    PLANCK,
    SPEED_OF_LIGHT,
)
from uwoc_relay_sim.errors import ConvergenceError

from conftest import synthetic_hop

Q5 = 0.5 * math.erfc(5.0 / math.sqrt(2.0))  # Gaussian tail at 5 sigma


def q(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# NoiseModel / CountScale / HopBerInputs
# ---------------------------------------------------------------------------


def test_noise_model_typical_frozen_values():
    noise = u.NoiseModel.typical(1e-9)
    expected_sigma = 2.0 * BOLTZMANN * 290.0 * 1e-9 / (100.0 * ELEMENTARY_CHARGE**2)
    assert noise.sigma_th_sq == pytest.approx(expected_sigma, rel=1e-14)
    assert noise.sigma_th_sq == pytest.approx(3121020.696663502, rel=1e-12)
    assert noise.n_bd == pytest.approx(7.833873832709114, rel=1e-12)
    # Both scale linearly with the bit duration.
    slow = u.NoiseModel.typical(5e-8)
    assert slow.sigma_th_sq == pytest.approx(50.0 * noise.sigma_th_sq, rel=1e-12)
    assert slow.n_bd == pytest.approx(50.0 * noise.n_bd, rel=1e-12)


def test_noise_model_validation_lists_all_problems():
    with pytest.raises(ValueError) as exc:
        u.NoiseModel(
            background_rate=-1.0,
            dark_rate=-2.0,
            receiver_temperature=0.0,
            load_resistance=100.0,
            bit_duration=1e-9,
        )
    msg = str(exc.value)
    assert "background_rate" in msg and "dark_rate" in msg and "receiver_temperature" in msg


def test_count_scale_from_power():
    scale = u.CountScale.from_power(1e-3, 1e-9)
    expected = 0.8 * 1e-3 * 1e-9 * 532e-9 / (PLANCK * SPEED_OF_LIGHT)
    assert scale.photons_per_bit == pytest.approx(expected, rel=1e-14)
    assert u.CountScale.from_power(0.0, 1e-9).photons_per_bit == 0.0
    with pytest.raises(ValueError, match="power"):
        u.CountScale.from_power(-1.0, 1e-9)
    with pytest.raises(ValueError, match="quantum_efficiency"):
        u.CountScale.from_power(1e-3, 1e-9, quantum_efficiency=0.0)
    with pytest.raises(ValueError, match="photons_per_bit"):
        u.CountScale(photons_per_bit=-5.0)


def test_hop_ber_inputs_type_checks():
    hop = synthetic_hop(17.0)
    assert hop.memory == 0
    with pytest.raises(TypeError, match="energies"):
        u.HopBerInputs(energies=None, fading=hop.fading, noise=hop.noise, scale=hop.scale)
    with pytest.raises(TypeError, match="fading"):
        u.HopBerInputs(energies=hop.energies, fading=0.05, noise=hop.noise, scale=hop.scale)


# ---------------------------------------------------------------------------
# Conditional AWGN receiver
# ---------------------------------------------------------------------------


def five_sigma_hop() -> u.HopBerInputs:
    """No-ISI hop tuned so the decision margin is exactly 5 sigma."""
    noise = u.NoiseModel.typical(1e-9)
    sigma_tb = math.sqrt(noise.sigma_th_sq + noise.n_bd)
    return u.HopBerInputs(
        energies=u.BitEnergies(e_signal=1.0, e_isi=np.array([]), memory=0),
        fading=u.FadingModel(sigma_x_sq=0.0),
        noise=noise,
        scale=u.CountScale(photons_per_bit=10.0 * sigma_tb),
    )


def test_conditional_awgn_five_sigma_point():
    hop = five_sigma_hop()
    assert u.conditional_ber_awgn(1, [], 1.0, hop) == pytest.approx(Q5, rel=1e-13)
    assert Q5 == pytest.approx(2.866515719235352e-07, rel=1e-12)


def test_conditional_awgn_symmetry_without_isi():
    hop = synthetic_hop(18.0)
    for h in (0.3, 1.0, 2.7):
        assert u.conditional_ber_awgn(1, [], h, hop) == u.conditional_ber_awgn(0, [], h, hop)


def test_conditional_awgn_isi_helps_ones_hurts_zeros():
    hop = synthetic_hop(18.0, e_isi=[2e-5])
    base1 = u.conditional_ber_awgn(1, [0], 1.0, hop)
    base0 = u.conditional_ber_awgn(0, [0], 1.0, hop)
    assert u.conditional_ber_awgn(1, [1], 1.0, hop) < base1
    assert u.conditional_ber_awgn(0, [1], 1.0, hop) > base0


def test_conditional_awgn_validation():
    hop = synthetic_hop(18.0, e_isi=[2e-5])
    with pytest.raises(ValueError, match="b0"):
        u.conditional_ber_awgn(2, [0], 1.0, hop)
    with pytest.raises(ValueError, match="length 1"):
        u.conditional_ber_awgn(1, [0, 1], 1.0, hop)
    with pytest.raises(ValueError, match="0 or 1"):
        u.conditional_ber_awgn(1, [0.5], 1.0, hop)
    with pytest.raises(ValueError, match="h"):
        u.conditional_ber_awgn(1, [0], 0.0, hop)


# ---------------------------------------------------------------------------
# Poisson means
# ---------------------------------------------------------------------------


def test_poisson_means_hand_values():
    hop = synthetic_hop(20.0, e_isi=[8e-6, 4e-6])
    n_ph = hop.scale.photons_per_bit
    n_bd = hop.noise.n_bd
    assert u.poisson_means(0, [0, 0], 1.0, hop) == pytest.approx(n_bd, rel=1e-14)
    assert u.poisson_means(1, [0, 0], 2.0, hop) == pytest.approx(
        n_bd + 2.0 * n_ph * 1.7e-4, rel=1e-14
    )
    assert u.poisson_means(1, [1, 1], 1.0, hop) == pytest.approx(
        n_bd + n_ph * (1.7e-4 + 1.2e-5), rel=1e-14
    )
    # Linearity in h of the signal part.
    m1 = u.poisson_means(1, [1, 0], 1.0, hop) - n_bd
    m3 = u.poisson_means(1, [1, 0], 3.0, hop) - n_bd
    assert m3 == pytest.approx(3.0 * m1, rel=1e-12)


# ---------------------------------------------------------------------------
# Exact Poisson (+) Gaussian oracle
# ---------------------------------------------------------------------------


def poisson_gaussian_tail(m: float, sigma_sq: float, beta: float) -> float:
    """P(N + Z > beta) with N ~ Poisson(m), Z ~ Normal(0, sigma_sq), exactly
    (to float precision) by summing the pmf over an 18-sigma window."""
    lo = max(0, int(m - 18.0 * math.sqrt(m) - 40.0))
    hi = int(m + 18.0 * math.sqrt(m) + 80.0)
    ks = np.arange(lo, hi + 1)
    pk = poisson.pmf(ks, m)
    assert abs(pk.sum() - 1.0) < 1e-12, "pmf window too narrow"
    sigma = math.sqrt(sigma_sq)
    return float(pk @ norm.sf((beta - ks) / sigma))


def exact_ber_at(m0: float, m1: float, sigma_sq: float, beta: float) -> float:
    miss = 1.0 - poisson_gaussian_tail(m1, sigma_sq, beta)
    false_alarm = poisson_gaussian_tail(m0, sigma_sq, beta)
    return 0.5 * (false_alarm + miss)


# ---------------------------------------------------------------------------
# Saddle-point solver
# ---------------------------------------------------------------------------


def test_saddle_point_frozen_regression():
    r = u.saddle_point_ber(2.0, 20.0, 1.0)
    assert r.ber == pytest.approx(0.001728342412171052, rel=1e-12)
    assert r.s0 == pytest.approx(1.3187807407632313, rel=1e-12)
    assert r.s1 == pytest.approx(-0.9298127566178696, rel=1e-12)
    assert r.beta == pytest.approx(8.038224492743312, rel=1e-12)
    assert 2.0 < r.beta < 20.0 and r.s0 > 0.0 > r.s1


@pytest.mark.parametrize(
    "m0,m1,sigma_sq",
    [(2.0, 20.0, 1.0), (5.0, 100.0, 100.0), (20.0, 400.0, 1e4), (1.0, 100.0, 1.0)],
)
def test_saddle_point_close_to_exact_oracle(m0, m1, sigma_sq):
    r = u.saddle_point_ber(m0, m1, sigma_sq)
    exact = exact_ber_at(m0, m1, sigma_sq, r.beta)
    if 1e-9 <= exact <= 0.1:
        assert r.ber == pytest.approx(exact, rel=0.15)


def test_saddle_point_thermal_limit():
    # With sigma^2 >> m1 and a genuine tail, the count granularity washes
    # out and the error approaches the matched-threshold Gaussian value
    # Q((m1 - m0) / (2 sigma)).
    for m0, m1, s2, tol in ((10.0, 410.0, 1e4, 0.05), (5.0, 805.0, 4e4, 0.05)):
        r = u.saddle_point_ber(m0, m1, s2)
        limit = q((m1 - m0) / (2.0 * math.sqrt(s2)))
        assert r.ber == pytest.approx(limit, rel=tol)


def test_saddle_point_quantum_corner():
    # Nearly-noiseless photon counting: m0 = 0, vanishing Gaussian part.
    # The exact error at the optimal (0-count) threshold is ~exp(-m1)/2;
    # the saddle point tracks it closely while the Gaussian model can only
    # produce Q(sqrt(m1)) -- orders of magnitude off in the deep quantum
    # regime, which is exactly why both models are kept.
    m1 = 25.0
    saddle = u.saddle_point_ber(0.0, m1, 1e-6)
    exact = exact_ber_at(0.0, m1, 1e-6, saddle.beta)
    gauss = u.gaussian_ber(0.0, m1, 1e-6)
    assert saddle.ber == pytest.approx(exact, rel=0.15)
    assert saddle.ber == pytest.approx(0.5 * math.exp(-m1), rel=0.15)
    assert gauss == pytest.approx(q(math.sqrt(m1)), rel=0.01)
    assert saddle.ber < 1e-4 * gauss


def test_saddle_point_monotone_in_separation():
    vals = [u.saddle_point_ber(5.0, m1, 100.0).ber for m1 in (10.0, 20.0, 40.0, 80.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_saddle_point_large_count_thermal_regime():
    # Regression for the relative residual check: multi-million-count
    # means with a huge thermal variance used to trip a spurious
    # convergence failure because one ulp of beta moves the log-domain
    # threshold residual by ~1e-8. The error itself is a ~500-sigma tail,
    # so the correct output is an exact-zero underflow, not an exception.
    r = u.saddle_point_ber(585.1243452584741, 12130310.075963056, 156051034.83317512)
    assert r.ber == 0.0
    assert r.s0 > 0.0 > r.s1
    # Same regime at a representable separation: thermal noise dominates
    # the count granularity, so the saddle point lands on the Gaussian
    # model's answer.
    m0, s2 = 585.1243452584741, 156051034.83317512
    m1 = m0 + 12.0 * math.sqrt(s2)
    assert u.saddle_point_ber(m0, m1, s2).ber == pytest.approx(
        u.gaussian_ber(m0, m1, s2), rel=0.02
    )


def test_saddle_point_validation():
    with pytest.raises(ValueError, match="m1"):
        u.saddle_point_ber(10.0, 10.0, 1.0)
    with pytest.raises(ValueError, match="m0"):
        u.saddle_point_ber(-1.0, 10.0, 1.0)
    with pytest.raises(ValueError, match="sigma_th_sq"):
        u.saddle_point_ber(1.0, 10.0, 0.0)


# ---------------------------------------------------------------------------
# Gaussian approximation
# ---------------------------------------------------------------------------


def test_gaussian_ber_closed_form():
    m0, m1, s2 = 100.0, 400.0, 100.0
    expected = q((m1 - m0) / (math.sqrt(m1 + s2) + math.sqrt(m0 + s2)))
    got = u.gaussian_ber(m0, m1, s2)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(1.0299420302622718e-16, rel=1e-12)


def test_gaussian_ber_edges_and_validation():
    assert u.gaussian_ber(5.0, 5.0, 10.0) == 0.5
    assert u.gaussian_ber(0.0, 25.0, 0.0) == pytest.approx(q(5.0), rel=1e-14)
    with pytest.raises(ValueError, match="m1"):
        u.gaussian_ber(10.0, 5.0, 1.0)
    with pytest.raises(ValueError, match="sigma_th_sq"):
        u.gaussian_ber(1.0, 10.0, -1.0)


# ---------------------------------------------------------------------------
# Fading/ISI averaging
# ---------------------------------------------------------------------------


def test_hop_average_zero_signal_is_coin_flip():
    hop = synthetic_hop(-300.0)  # effectively zero photons
    dark = u.HopBerInputs(
        energies=hop.energies,
        fading=hop.fading,
        noise=hop.noise,
        scale=u.CountScale(photons_per_bit=0.0),
    )
    for method in u.BER_METHODS:
        assert u.hop_average_ber(dark, method) == 0.5


def test_hop_average_degenerate_fading_no_isi_equals_conditional():
    hop = synthetic_hop(17.762, sigma_x_sq=0.0)
    expected = u.conditional_ber_awgn(1, [], 1.0, hop)
    assert u.hop_average_ber(hop, "awgn_ghqf") == pytest.approx(expected, rel=1e-14)


def test_hop_average_zero_isi_energies_match_memoryless():
    base = synthetic_hop(18.0)
    padded = synthetic_hop(18.0, e_isi=[0.0, 0.0])
    for method in u.BER_METHODS:
        assert u.hop_average_ber(padded, method) == pytest.approx(
            u.hop_average_ber(base, method), rel=1e-12
        )


def ghqf_oracle_awgn(hop: u.HopBerInputs, order: int = 30) -> float:
    """Hand-rolled fading + pattern average of the conditional AWGN model."""
    rule = u.ghq_rule(order)
    patterns = (
        [[]]
        if hop.memory == 0
        else [list(map(int, np.binary_repr(i, hop.memory))) for i in range(2**hop.memory)]
    )
    total = 0.0
    for x, w in zip(rule.nodes, rule.weights):
        h = math.exp(2.0 * math.sqrt(2.0 * hop.fading.sigma_x_sq) * x + 2.0 * hop.fading.mu_x)
        cond = np.mean(
            [
                0.5 * (u.conditional_ber_awgn(1, b, h, hop) + u.conditional_ber_awgn(0, b, h, hop))
                for b in patterns
            ]
        )
        total += w * cond
    return total / math.sqrt(math.pi)


@pytest.mark.parametrize("e_isi", [(), (8e-6, 4e-6)])
def test_hop_average_awgn_matches_hand_rolled_loop(e_isi):
    hop = synthetic_hop(17.762, e_isi=e_isi)
    assert u.hop_average_ber(hop, "awgn_ghqf") == pytest.approx(ghqf_oracle_awgn(hop), rel=1e-12)


def saddle_hop_oracle(hop: u.HopBerInputs, order: int = 30) -> float:
    """Per-pattern, per-node exact saddle solves (no interpolation grid)."""
    rule = u.ghq_rule(order)
    patterns = (
        np.zeros((1, 0))
        if hop.memory == 0
        else np.array([[int(c) for c in np.binary_repr(i, hop.memory)] for i in range(2**hop.memory)])
    )
    isi_sums = patterns @ hop.energies.e_isi * hop.scale.photons_per_bit
    total = 0.0
    for x, w in zip(rule.nodes, rule.weights):
        h = math.exp(2.0 * math.sqrt(2.0 * hop.fading.sigma_x_sq) * x + 2.0 * hop.fading.mu_x)
        vals = []
        for s in np.atleast_1d(isi_sums):
            m0 = hop.noise.n_bd + h * s
            m1 = m0 + h * hop.scale.photons_per_bit * hop.energies.e_signal
            vals.append(u.saddle_point_ber(m0, m1, hop.noise.sigma_th_sq).ber)
        total += w * float(np.mean(vals))
    return total / math.sqrt(math.pi)


@pytest.mark.parametrize("power_dbm", [13.0, 17.0, 19.0])
def test_hop_average_saddle_grid_matches_exact_solves(power_dbm):
    # The production path evaluates the saddle solver on a 65-point
    # monotone grid per fading node and interpolates the 2^L pattern
    # values; it must agree with per-pattern exact solves to rounding.
    hop = synthetic_hop(power_dbm, e_isi=[8e-6, 4e-6])
    grid = u.hop_average_ber(hop, "saddle_point")
    exact = saddle_hop_oracle(hop)
    assert grid == pytest.approx(exact, rel=1e-12)


def test_hop_average_monotone_in_power_and_fading():
    bers = [u.hop_average_ber(synthetic_hop(p), "awgn_ghqf") for p in (10.0, 14.0, 18.0, 22.0)]
    assert all(a > b for a, b in zip(bers, bers[1:]))
    by_fading = [
        u.hop_average_ber(synthetic_hop(19.0, sigma_x_sq=s2), "awgn_ghqf")
        for s2 in (0.0, 0.05, 0.15, 0.25)
    ]
    assert all(a < b for a, b in zip(by_fading, by_fading[1:]))


def test_hop_average_long_memory_sampling_is_deterministic():
    hop = synthetic_hop(18.0, e_isi=np.full(17, 1e-6))
    a = u.hop_average_ber(hop, "awgn_ghqf")
    b = u.hop_average_ber(hop, "awgn_ghqf")
    assert a == b
    assert 0.0 < a < 0.5


def test_hop_average_validation():
    hop = synthetic_hop(18.0)
    with pytest.raises(ValueError, match="method"):
        u.hop_average_ber(hop, "midpoint")
    with pytest.raises(ValueError, match="ghq"):
        u.hop_average_ber(hop, "awgn_ghqf", ghq="thirty")
