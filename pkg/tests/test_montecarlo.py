"""Reproducible Monte Carlo engine: determinism, estimates, outage floors."""

import math

import numpy as np
import pytest

from csitsim.montecarlo import (
    McEstimate,
    log10_outage,
    log10_outage_floor,
    mc_mean,
    outage_probability,
    stream,
)


def test_stream_is_deterministic_and_keyed():
    a = stream(1, 2, 3).standard_normal(4)
    b = stream(1, 2, 3).standard_normal(4)
    c = stream(1, 2, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)


def test_constant_sampler():
    est = mc_mean(lambda t, rng: 3.5, trials=100, seed=0)
    assert est.mean == 3.5
    assert est.std_error == 0.0
    assert est.trials == 100


def test_uniform_mean_within_four_standard_errors():
    n = 100_000
    est = mc_mean(lambda t, rng: rng.uniform(), trials=n, seed=1)
    assert abs(est.mean - 0.5) <= 4.0 / math.sqrt(12.0 * n)
    assert est.std_error == pytest.approx(1.0 / math.sqrt(12.0 * n), rel=0.05)


def test_same_seed_bit_identical():
    est1 = mc_mean(lambda t, rng: rng.normal(), trials=500, seed=9)
    est2 = mc_mean(lambda t, rng: rng.normal(), trials=500, seed=9)
    assert est1 == est2


def test_worker_count_does_not_change_result():
    def sampler(t, rng):
        return rng.exponential()

    est1 = mc_mean(sampler, trials=1000, seed=4, workers=1)
    est8 = mc_mean(sampler, trials=1000, seed=4, workers=8)
    assert est1 == est8


def test_non_finite_sample_reports_trial_index():
    def sampler(t, rng):
        return math.nan if t == 17 else 1.0

    with pytest.raises(ValueError, match="trial 17"):
        mc_mean(sampler, trials=50, seed=0)


def test_outage_trivial_bounds():
    zero = outage_probability(lambda t, rng: 10.0, threshold=5.0, trials=200, seed=0)
    one = outage_probability(lambda t, rng: 1.0, threshold=5.0, trials=200, seed=0)
    assert zero.mean == 0.0 and zero.std_error == 0.0
    assert one.mean == 1.0 and one.std_error == 0.0


def test_outage_uniform_known_cdf():
    n = 100_000
    est = outage_probability(lambda t, rng: rng.uniform(), threshold=0.3, trials=n, seed=2)
    assert abs(est.mean - 0.3) <= 4 * est.std_error
    assert est.std_error == pytest.approx(math.sqrt(0.3 * 0.7 / n), rel=0.05)


def test_standard_error_scaling_slope():
    # se ~ trials^-0.5: log-log regression slope within +-0.05 of -0.5
    trials = np.array([500, 2000, 8000, 32000, 128000])
    ses = [mc_mean(lambda t, rng: rng.uniform(), int(n), seed=3).std_error for n in trials]
    slope = np.polyfit(np.log10(trials), np.log10(ses), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_log10_outage_floor_semantics():
    assert log10_outage_floor(20000) == pytest.approx(-(math.log10(20000) + 1.0))
    value, below = log10_outage(McEstimate(mean=0.0, std_error=0.0, trials=1000, seed=0))
    assert below and value == pytest.approx(-4.0)
    value, below = log10_outage(McEstimate(mean=0.01, std_error=0.001, trials=1000, seed=0))
    assert not below and value == pytest.approx(-2.0)


def test_estimate_validation():
    with pytest.raises(ValueError):
        McEstimate(mean=0.0, std_error=-1.0, trials=10, seed=0)
    with pytest.raises(ValueError):
        McEstimate(mean=0.0, std_error=0.0, trials=0, seed=0)
    with pytest.raises(ValueError):
        mc_mean(lambda t, rng: 0.0, trials=0, seed=0)
