"""Acceptance suite: one test per contracted criterion.

Each test emits a single pass/fail line under ``pytest -v``. The first eight
criteria exercise only the simulator package; the ninth covers the separate
plotting package and is skipped when it is not installed.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import csitsim.cli as cli
from csitsim.beamforming import (
    maxmin_energy_covariance,
    sinr_balancing_precoder,
    statistical_sinr,
)
from csitsim.channel import (
    RicianChannelModel,
    UlaGeometry,
    exponential_correlation,
    sample_channel_block,
    second_moment,
)
from csitsim.scenarios import Fig1Config, Fig2Config, Fig4Config, run_fig1, run_fig2, run_fig4
from csitsim.units import db_to_linear
from csitsim.wet import aa_weights

from oracles import balanced_sinr_pg_oracle, fbl_min_n, maxmin_grid_oracle_m2

GOLDEN_DIR = Path(__file__).parent / "golden"


def test_criterion_1_coverage_ordering_and_levels_on_desk_scale_grid():
    config = Fig4Config(grid_resolution_m=2.0, outage_trials=2000)
    started = time.perf_counter()
    result = run_fig4(config, workers=1)
    elapsed = time.perf_counter() - started
    cov = {s.scheme: s.coverage for s in result.schemes}
    assert cov["AA"] < cov["SA"] < cov["AA_PI"]
    assert abs(cov["AA"] - 0.15) <= 0.08
    assert abs(cov["SA"] - 0.23) <= 0.08
    assert abs(cov["AA_PI"] - 0.30) <= 0.08
    assert cov["AA_ROTATED"] >= cov["AA"]
    assert elapsed < 600.0


def test_criterion_2_uncorrelated_rayleigh_sa_matches_single_antenna_and_aa():
    draws = 100_000
    geometry = UlaGeometry(4)
    model = RicianChannelModel(
        los_factor=0.0, azimuth=0.0, correlation=np.eye(4), path_loss_db=0.0
    )
    h = sample_channel_block(model, geometry, np.random.default_rng(1), draws)
    p_sa = np.mean(np.abs(h) ** 2, axis=1)
    p_aa = np.abs(h @ np.conj(aa_weights(4))) ** 2

    single = RicianChannelModel(
        los_factor=0.0, azimuth=0.0, correlation=np.eye(1), path_loss_db=0.0
    )
    h1 = sample_channel_block(single, UlaGeometry(1), np.random.default_rng(2), draws)
    p_single = np.abs(h1[:, 0]) ** 2

    se = lambda x: x.std(ddof=1) / math.sqrt(x.size)
    assert abs(p_sa.mean() - p_single.mean()) <= 4.0 * math.hypot(se(p_sa), se(p_single))
    paired = p_aa - p_sa
    assert abs(paired.mean()) <= 4.0 * se(paired)


def test_criterion_3_two_antenna_solver_matches_grid_oracle_100_instances():
    started = time.perf_counter()
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        k = int(rng.integers(2, 5))
        mats = []
        for _ in range(k):
            if rng.uniform() < 0.5:
                h = rng.normal(size=2) + 1j * rng.normal(size=2)
                mats.append(np.outer(h, h.conj()) / 2.0)
            else:
                a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
                mats.append(a @ a.conj().T / 4.0)
        stack = np.stack(mats)
        cov, report = maxmin_energy_covariance(stack, power_budget=1.0, tol=1e-6)
        oracle = maxmin_grid_oracle_m2(stack, 1.0)
        assert abs(report.objective - oracle) <= 1e-3, f"instance {i}"
        assert np.linalg.eigvalsh(cov.matrix).min() >= -1e-8, f"instance {i}"
        assert np.trace(cov.matrix).real == pytest.approx(1.0, abs=1e-6), f"instance {i}"
        assert np.allclose(cov.matrix, cov.matrix.conj().T, atol=1e-10), f"instance {i}"
    assert time.perf_counter() - started < 120.0


def test_criterion_4_trained_device_sweep_monotone_and_scenario_ordering():
    config = Fig1Config()  # 5000 blocks
    started = time.perf_counter()
    result = run_fig1(config)
    elapsed = time.perf_counter() - started
    for scenario in config.scenario_names:
        points = [result.point(scenario, k) for k in config.pilots_sweep]
        for prev, nxt in zip(points, points[1:]):
            assert nxt.maxmin_mw >= prev.maxmin_mw, (
                f"{scenario}: K={nxt.num_trained} below K={prev.num_trained}"
            )
        best = max(points, key=lambda p: p.maxmin_mw)
        last = points[-1]
        assert last.maxmin_mw >= best.maxmin_mw - 4.0 * math.hypot(
            last.std_error, best.std_error
        )
    for k in config.pilots_sweep:
        assert result.point("B", k).maxmin_mw < result.point("A", k).maxmin_mw, f"K={k}"
    assert elapsed < 300.0


def test_criterion_5_blocklength_sweep_monotone_and_deterministic_limit():
    config = Fig2Config()  # LoS sweep 0/3/6/10/13 dB, 1e5 draws
    started = time.perf_counter()
    result = run_fig2(config)
    lengths = [p.blocklength for p in result.points]
    assert all(n is not None for n in lengths)
    assert all(a >= b for a, b in zip(lengths, lengths[1:])), lengths

    import dataclasses

    (limit_point,) = run_fig2(dataclasses.replace(config, los_sweep_db=(120.0,))).points
    assert limit_point.blocklength is not None
    sinrs = db_to_linear(np.asarray(limit_point.balanced_sinr_db))
    oracle = max(
        fbl_min_n(float(s), config.fbl.payload_bits, config.fbl.target_error)
        for s in sinrs
    )
    assert limit_point.blocklength == oracle
    assert time.perf_counter() - started < 300.0


def test_criterion_6_balancing_spread_and_projected_gradient_oracle_50_instances():
    started = time.perf_counter()
    for i in range(50):
        rng = np.random.default_rng(3000 + i)
        mats = []
        for _ in range(4):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            mats.append(a @ a.conj().T / 16.0)
        precoder, report = sinr_balancing_precoder(
            mats, noise_power=1.0, power_budget=1.0
        )
        sinrs = statistical_sinr(precoder, mats, 1.0)
        assert sinrs.max() - sinrs.min() <= 1e-4 * sinrs.min(), f"instance {i}"
        oracle = balanced_sinr_pg_oracle(mats, 1.0, 1.0, restarts=20, iterations=500)
        assert report.objective >= oracle * (1.0 - 1e-2), (
            f"instance {i}: {report.objective} vs oracle {oracle}"
        )
    assert time.perf_counter() - started < 300.0


def test_criterion_7_channel_second_moment_matches_closed_form():
    draws = 100_000
    geometry = UlaGeometry(4)
    for kap_idx, kappa in enumerate((0.0, 2.0, 10.0)):
        for r_idx, r in enumerate((0.0, 0.5, 0.9)):
            model = RicianChannelModel(
                los_factor=kappa,
                azimuth=0.7,
                correlation=exponential_correlation(4, r),
                path_loss_db=2.0,
            )
            closed = second_moment(model, geometry)
            rng = np.random.default_rng(777 + 10 * kap_idx + r_idx)
            h = sample_channel_block(model, geometry, rng, draws)
            outer = h[:, :, None] * h[:, None, :].conj()
            emp = outer.mean(axis=0)
            for part in (np.real, np.imag):
                se = part(outer).std(axis=0, ddof=1) / math.sqrt(draws)
                delta = np.abs(part(emp) - part(closed))
                assert np.all(delta <= 4.0 * se + 1e-9), (kappa, r)


def test_criterion_8_csv_byte_identity_across_reruns_and_worker_counts(tmp_path):
    tiny = {
        "fig1": {
            "num_devices": 2,
            "num_antennas": 2,
            "device_azimuths_deg": [-30.0, 30.0],
            "pathloss_db": {"A": [50.0, 51.0], "B": [48.0, 52.0]},
            "pilots_sweep": [1, 2],
            "num_blocks": 40,
        },
        "fig2": {
            "num_users": 2,
            "num_antennas": 2,
            "user_azimuths_deg": [0.0, 90.0],
            "correlation_params": [0.3, 0.6],
            "los_sweep_db": [3.0, 13.0],
            "fbl": {"payload_bits": 64, "target_error": 1e-3},
            "trials": 2000,
        },
        "fig4": {
            "area_m": [8.0, 8.0],
            "grid_resolution_m": 2.0,
            "beacon_positions_m": [[4.0, 4.0]],
            "schemes": ["AA", "AA_PI", "AA_ROTATED", "SA"],
            "mean_trials": 150,
            "outage_trials": 150,
            "rotation_grid_points": 8,
            "rotation_trials": 32,
        },
    }
    for kind, data in tiny.items():
        config_path = tmp_path / f"{kind}.json"
        config_path.write_text(json.dumps(data))
        outputs = []
        for run_idx, threads in enumerate(("1", "1", "8")):
            out = tmp_path / f"{kind}-run{run_idx}"
            code = cli.main(
                ["run", kind, str(config_path), "--out-dir", str(out),
                 "--threads", threads]
            )
            assert code == 0, kind
            outputs.append((out / f"{kind}.csv").read_bytes())
        assert outputs[0] == outputs[1], f"{kind}: rerun differs"
        assert outputs[0] == outputs[2], f"{kind}: worker count changed bytes"


def test_criterion_9_plots_render_golden_csvs_deterministically(tmp_path):
    csitplots = pytest.importorskip("csitplots")
    renders = [
        ("fig1.csv", csitplots.plot_curves),
        ("fig2.csv", csitplots.plot_curves),
        ("fig4.csv", csitplots.plot_heatmaps),
    ]
    for name, plot in renders:
        first = tmp_path / f"first-{name}.png"
        second = tmp_path / f"second-{name}.png"
        plot(GOLDEN_DIR / name, first)
        plot(GOLDEN_DIR / name, second)
        assert first.read_bytes() == second.read_bytes(), name

    # The golden fig4 run uses one beacon at (20, 20); judge beam structure on
    # the cells exactly 10 m from it, where distance effects cancel.
    table = csitplots.load_heatmap_table(GOLDEN_DIR / "fig4.csv")
    ring = {}
    for scheme in ("AA", "SA"):
        grid = table.schemes[scheme]
        gx, gy = np.meshgrid(grid.xs, grid.ys)
        on_ring = np.isclose(np.hypot(gx - 20.0, gy - 20.0), 10.0)
        assert on_ring.sum() >= 8, "golden grid lost its radius-10 ring"
        ring[scheme] = grid.mean_dbm[on_ring]
    assert np.ptp(ring["SA"]) < 2.0  # antenna cycling: near-uniform
    assert np.ptp(ring["AA"]) > 6.0  # coherent beam: visible lobes
