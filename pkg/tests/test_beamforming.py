"""Max-min energy covariance solver and SINR-balancing precoder."""

import math

import numpy as np
import pytest

from csitsim.beamforming import (
    PrecodingMatrix,
    SolverReport,
    TransmitCovariance,
    average_sinr_mc,
    maxmin_energy_covariance,
    select_trained_devices,
    sinr_balancing_precoder,
    solve_maxmin_batch,
    statistical_sinr,
)
from csitsim.channel import (
    RicianChannelModel,
    UlaGeometry,
    exponential_correlation,
    second_moment,
    steering_vector,
)

from oracles import balanced_sinr_pg_oracle, maxmin_alpha_oracle, maxmin_grid_oracle_m2


def random_instance(rng, m=2, min_devices=2, max_devices=4, rank1_fraction=0.5):
    """Random Hermitian PSD constraint stack with mixed ranks."""
    k = int(rng.integers(min_devices, max_devices + 1))
    mats = []
    for _ in range(k):
        if rng.uniform() < rank1_fraction:
            h = rng.normal(size=m) + 1j * rng.normal(size=m)
            mats.append(np.outer(h, h.conj()) / m)
        else:
            a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
            mats.append(a @ a.conj().T / (m * m))
    return np.stack(mats)


# ---------------------------------------------------------------------------
# select_trained_devices


def test_selection_scenario_a_top_three():
    losses = [50.0 + (i + 1) / 2.0 for i in range(16)]
    np.testing.assert_array_equal(select_trained_devices(losses, 3), [13, 14, 15])


def test_selection_full_set():
    losses = [3.0, 1.0, 2.0]
    np.testing.assert_array_equal(select_trained_devices(losses, 3), [0, 1, 2])


def test_selection_tie_break_lowest_index():
    np.testing.assert_array_equal(select_trained_devices([60.0, 60.0, 40.0], 1), [0])


def test_selection_rejects_out_of_range():
    with pytest.raises(ValueError):
        select_trained_devices([1.0, 2.0], 0)
    with pytest.raises(ValueError):
        select_trained_devices([1.0, 2.0], 3)


# ---------------------------------------------------------------------------
# result-type invariants


def test_transmit_covariance_validation():
    q = np.eye(2)
    TransmitCovariance(matrix=q, power_budget=2.0)
    with pytest.raises(ValueError):
        TransmitCovariance(matrix=q, power_budget=3.0)  # trace mismatch
    with pytest.raises(ValueError):
        TransmitCovariance(matrix=np.array([[1.0, 1.0], [0.0, 1.0]]), power_budget=2.0)
    with pytest.raises(ValueError):
        TransmitCovariance(matrix=np.array([[2.0, 0.0], [0.0, -1.0]]), power_budget=1.0)


def test_precoding_matrix_validation():
    w = np.ones((2, 2)) / 2.0
    PrecodingMatrix(columns=w, power_budget=1.0)
    with pytest.raises(ValueError):
        PrecodingMatrix(columns=w, power_budget=2.0)


def test_solver_report_validation():
    with pytest.raises(ValueError):
        SolverReport(objective=1.0, iterations=1, converged=True, residual=-0.1)


# ---------------------------------------------------------------------------
# maxmin_energy_covariance


def test_single_device_matched_beam():
    rng = np.random.default_rng(0)
    h = rng.normal(size=3) + 1j * rng.normal(size=3)
    cov, report = maxmin_energy_covariance([np.outer(h, h.conj())], power_budget=2.0)
    norm_sq = float(np.vdot(h, h).real)
    assert report.objective == pytest.approx(2.0 * norm_sq, rel=1e-9)
    expected = 2.0 * np.outer(h, h.conj()) / norm_sq
    np.testing.assert_allclose(cov.matrix, expected, atol=1e-9 * norm_sq)


def test_orthonormal_pair_splits_evenly():
    h1 = np.array([1.0, 0.0], dtype=complex)
    h2 = np.array([0.0, 1.0], dtype=complex)
    cov, report = maxmin_energy_covariance(
        [np.outer(h1, h1.conj()), np.outer(h2, h2.conj())], power_budget=1.0
    )
    assert report.converged
    assert report.objective == pytest.approx(0.5, abs=1e-6)
    assert report.objective == pytest.approx(
        maxmin_alpha_oracle(h1, h2, 1.0), abs=2e-4
    )


def test_three_random_m2_devices_match_grid_oracle():
    rng = np.random.default_rng(7)
    hs = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(3)]
    stack = np.stack([np.outer(h, h.conj()) for h in hs])
    cov, report = maxmin_energy_covariance(stack, power_budget=1.0)
    oracle = maxmin_grid_oracle_m2(stack, 1.0)
    assert report.converged
    assert report.objective == pytest.approx(oracle, abs=1e-3)


@pytest.mark.parametrize("seed", range(8))
def test_random_m2_instances_match_grid_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    stack = random_instance(rng)
    cov, report = maxmin_energy_covariance(stack, power_budget=1.0)
    oracle = maxmin_grid_oracle_m2(stack, 1.0)
    assert report.converged
    assert abs(report.objective - oracle) <= 1e-3
    assert np.linalg.eigvalsh(cov.matrix).min() >= -1e-8
    assert np.trace(cov.matrix).real == pytest.approx(1.0, abs=1e-6)


def test_scale_equivariance():
    rng = np.random.default_rng(3)
    stack = random_instance(rng, m=3, min_devices=3, max_devices=3)
    _, report1 = maxmin_energy_covariance(stack, power_budget=1.0)
    _, report_c = maxmin_energy_covariance(7.5 * stack, power_budget=1.0)
    assert report_c.objective == pytest.approx(7.5 * report1.objective, rel=1e-6)


def test_adding_constraints_never_raises_objective():
    rng = np.random.default_rng(11)
    stack = random_instance(rng, m=3, min_devices=4, max_devices=4, rank1_fraction=1.0)
    objectives = []
    for k in (2, 3, 4):
        _, report = maxmin_energy_covariance(stack[:k], power_budget=1.0)
        objectives.append(report.objective)
    assert objectives[0] >= objectives[1] - 1e-6
    assert objectives[1] >= objectives[2] - 1e-6


def test_batch_solver_agrees_with_single_solver():
    rng = np.random.default_rng(21)
    batch = np.stack([random_instance(rng, m=3, min_devices=3, max_devices=3)
                      for _ in range(6)])
    result = solve_maxmin_batch(batch, power_budget=1.0, tol=1e-4)
    assert result.converged.all()
    for b in range(batch.shape[0]):
        _, report = maxmin_energy_covariance(batch[b], power_budget=1.0, tol=1e-6)
        assert result.objectives[b] == pytest.approx(report.objective, rel=5e-4)


def test_batch_shapes_and_invariants():
    rng = np.random.default_rng(2)
    batch = np.stack([random_instance(rng, m=2, min_devices=2, max_devices=2)
                      for _ in range(5)])
    result = solve_maxmin_batch(batch, power_budget=3.0)
    assert result.covariances.shape == (5, 2, 2)
    traces = np.einsum("bii->b", result.covariances).real
    np.testing.assert_allclose(traces, 3.0, rtol=1e-9)
    for q in result.covariances:
        assert np.linalg.eigvalsh(q).min() >= -1e-8 * 3.0
        np.testing.assert_allclose(q, q.conj().T, atol=1e-10 * 3.0)


def test_zero_constraint_pins_objective_at_zero():
    stack = np.stack([np.zeros((2, 2)), np.eye(2)])
    cov, report = maxmin_energy_covariance(stack, power_budget=1.0)
    assert report.objective == pytest.approx(0.0, abs=1e-12)
    assert report.converged


# ---------------------------------------------------------------------------
# statistical_sinr


def test_statistical_sinr_matches_manual_formula():
    rng = np.random.default_rng(5)
    m, u = 4, 3
    mats = [random_instance(rng, m=m, min_devices=1, max_devices=1, rank1_fraction=0.0)[0]
            for _ in range(u)]
    w = rng.normal(size=(m, u)) + 1j * rng.normal(size=(m, u))
    w *= math.sqrt(2.0) / np.linalg.norm(w)
    precoder = PrecodingMatrix(columns=w, power_budget=2.0)
    sinrs = statistical_sinr(precoder, mats, noise_power=0.7)
    for i in range(u):
        signal = np.vdot(w[:, i], mats[i] @ w[:, i]).real
        interference = sum(
            np.vdot(w[:, j], mats[i] @ w[:, j]).real for j in range(u) if j != i
        )
        assert sinrs[i] == pytest.approx(signal / (interference + 0.7), rel=1e-12)


# ---------------------------------------------------------------------------
# sinr_balancing_precoder


def test_single_user_dominant_eigenvector():
    rng = np.random.default_rng(8)
    r = random_instance(rng, m=4, min_devices=1, max_devices=1, rank1_fraction=0.0)[0]
    precoder, report = sinr_balancing_precoder([r], noise_power=1.0, power_budget=3.0)
    lam_max = float(np.linalg.eigvalsh(r)[-1])
    assert report.objective == pytest.approx(3.0 * lam_max, rel=1e-9)
    assert report.converged


def test_two_orthogonal_users_balance_at_one():
    r1 = np.diag([1.0, 0.0]).astype(complex)
    r2 = np.diag([0.0, 1.0]).astype(complex)
    precoder, report = sinr_balancing_precoder([r1, r2], noise_power=1.0, power_budget=2.0)
    assert report.converged
    sinrs = statistical_sinr(precoder, [r1, r2], 1.0)
    np.testing.assert_allclose(sinrs, 1.0, rtol=1e-6)


def test_balance_spread_meets_tolerance():
    geometry = UlaGeometry(4)
    mats = []
    for i, (az, corr) in enumerate(zip((0.0, 0.5, 1.0, 1.5), (0.2, 0.4, 0.6, 0.8))):
        model = RicianChannelModel(
            los_factor=10.0,
            azimuth=az,
            correlation=exponential_correlation(4, corr),
            path_loss_db=3.0 * i,
        )
        mats.append(second_moment(model, geometry))
    precoder, report = sinr_balancing_precoder(mats, noise_power=1.0, power_budget=1.0, tol=1e-6)
    sinrs = statistical_sinr(precoder, mats, 1.0)
    assert report.converged
    assert (sinrs.max() - sinrs.min()) <= 1e-6 * sinrs.min() * (1 + 1e-9)


def test_joint_power_noise_scaling_invariance():
    rng = np.random.default_rng(9)
    mats = [random_instance(rng, m=3, min_devices=1, max_devices=1, rank1_fraction=0.0)[0]
            for _ in range(3)]
    _, report1 = sinr_balancing_precoder(mats, noise_power=1.0, power_budget=2.0)
    _, report_c = sinr_balancing_precoder(mats, noise_power=5.0, power_budget=10.0)
    assert report_c.objective == pytest.approx(report1.objective, rel=1e-9)


def test_balanced_value_not_beaten_by_projected_gradient():
    rng = np.random.default_rng(12)
    mats = [random_instance(rng, m=4, min_devices=1, max_devices=1, rank1_fraction=0.0)[0]
            for _ in range(4)]
    precoder, report = sinr_balancing_precoder(mats, noise_power=1.0, power_budget=1.0)
    oracle = balanced_sinr_pg_oracle(mats, 1.0, 1.0, restarts=6, iterations=300)
    assert report.objective >= oracle * (1.0 - 1e-2)


# ---------------------------------------------------------------------------
# average_sinr_mc


def test_zero_precoder_gives_zero_sinr():
    geometry = UlaGeometry(2)
    model = RicianChannelModel(
        los_factor=1.0, azimuth=0.0, correlation=np.eye(2), path_loss_db=0.0
    )
    precoder = PrecodingMatrix(columns=np.zeros((2, 1)), power_budget=0.0)
    (est,) = average_sinr_mc(precoder, [model], geometry, 1.0, trials=50, seed=0)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_single_user_no_fading_matches_deterministic_value():
    geometry = UlaGeometry(4)
    model = RicianChannelModel(
        los_factor=1e12, azimuth=0.6, correlation=np.eye(4), path_loss_db=10.0
    )
    a = steering_vector(geometry, 0.6)
    w = (a / np.linalg.norm(a))[:, None] * math.sqrt(2.0)
    precoder = PrecodingMatrix(columns=w, power_budget=2.0)
    (est,) = average_sinr_mc(precoder, [model], geometry, 1.0, trials=100, seed=1)
    g = model.path_gain
    expected = 2.0 * g * float(np.abs(np.vdot(a, a / np.linalg.norm(a))) ** 2)
    assert est.mean == pytest.approx(expected, rel=1e-6)


def test_orthogonal_los_high_kappa_matches_statistical_sinr():
    geometry = UlaGeometry(4)
    azimuths = (0.0, math.pi / 6.0)  # steering vectors orthogonal for spacing 1/2? use high kappa instead
    models = [
        RicianChannelModel(
            los_factor=200.0, azimuth=az, correlation=np.eye(4), path_loss_db=0.0
        )
        for az in azimuths
    ]
    mats = [second_moment(m, geometry) for m in models]
    precoder, _ = sinr_balancing_precoder(mats, noise_power=1.0, power_budget=2.0)
    estimates = average_sinr_mc(precoder, models, geometry, 1.0, trials=30000, seed=2)
    stat = statistical_sinr(precoder, mats, 1.0)
    for est, s in zip(estimates, stat):
        assert abs(est.mean - s) <= 4 * est.std_error + 5e-3 * s
