"""CSIT-free wireless energy transfer: transmit schemes, EH circuit, beacons.

Schemes: AA drives all elements with one signal (optionally with a fixed
per-element phase progression or a rotated array); SA cycles full power
through one element per equal sub-slot of the coherence block. Multiple
beacons transmit independent signals, so their RF powers add. Harvested
power passes through a piecewise-linear rectifier model with sensitivity
and saturation thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import channel as _channel
from .montecarlo import stream
from .units import dbm_to_mw

_KINDS = ("AA", "AA_PI", "AA_ROTATED", "SA")
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EhCircuitModel:
    """Piecewise-linear energy-harvesting circuit (thresholds in dBm)."""

    sensitivity_dbm: float
    saturation_dbm: float
    efficiency: float

    def __post_init__(self):
        if not self.sensitivity_dbm < self.saturation_dbm:
            raise ValueError(
                f"sensitivity ({self.sensitivity_dbm} dBm) must lie below "
                f"saturation ({self.saturation_dbm} dBm)"
            )
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")


@dataclass(frozen=True)
class WetScheme:
    """Transmit scheme; `rotation` (radians) is present iff kind is AA_ROTATED."""

    kind: str
    rotation: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == "AA_ROTATED":
            if self.rotation is None:
                raise ValueError("AA_ROTATED requires a rotation angle")
            if not np.isfinite(self.rotation):
                raise ValueError(f"rotation must be finite, got {self.rotation}")
        elif self.rotation is not None:
            raise ValueError(f"rotation is only valid for AA_ROTATED, not {self.kind}")


@dataclass(frozen=True)
class PowerBeacon:
    """A transmit array at a fixed position with a scheme and power budget."""

    geometry: _channel.UlaGeometry
    tx_power_dbm: float
    scheme: WetScheme

    def __post_init__(self):
        if not np.isfinite(self.tx_power_dbm):
            raise ValueError(f"tx_power_dbm must be finite, got {self.tx_power_dbm}")

    @property
    def tx_power_mw(self) -> float:
        return dbm_to_mw(self.tx_power_dbm)


def effective_geometry(beacon: PowerBeacon) -> _channel.UlaGeometry:
    """Beacon geometry with the AA_ROTATED rotation folded into the orientation."""
    if beacon.scheme.kind != "AA_ROTATED":
        return beacon.geometry
    g = beacon.geometry
    return _channel.UlaGeometry(
        num_elements=g.num_elements,
        element_spacing=g.element_spacing,
        orientation=g.orientation + beacon.scheme.rotation,
        position=g.position,
    )


def aa_weights(num_elements: int, phase_step: float = 0.0) -> np.ndarray:
    """Unit-norm weights exp(j*m*step)/sqrt(M); step 0 is plain AA, pi the
    alternating-phase variant."""
    if num_elements < 1:
        raise ValueError(f"num_elements must be >= 1, got {num_elements}")
    m = np.arange(num_elements)
    return np.exp(1j * m * phase_step) / math.sqrt(num_elements)


def scheme_weights(scheme: WetScheme, num_elements: int) -> np.ndarray:
    """Per-element weights of an AA-family scheme; SA has none (raises)."""
    if scheme.kind == "SA":
        raise ValueError("SA transmits per element; it has no weight vector")
    phase_step = math.pi if scheme.kind == "AA_PI" else 0.0
    return aa_weights(num_elements, phase_step)


def _coefficients(h) -> np.ndarray:
    if isinstance(h, _channel.ChannelRealization):
        return h.coefficients
    return np.asarray(h, dtype=complex)


def rf_power_aa(h, weights: np.ndarray, tx_power_mw: float) -> float:
    """Received RF power P*|h^H w|^2 when all elements send one signal."""
    coeff = _coefficients(h)
    w = np.asarray(weights, dtype=complex)
    if coeff.shape != w.shape:
        raise ValueError(f"channel shape {coeff.shape} != weights shape {w.shape}")
    return float(tx_power_mw * np.abs(np.vdot(coeff, w)) ** 2)


def rf_power_sa(h, tx_power_mw: float) -> float:
    """Block-averaged RF power P*(1/M)*sum_m |h_m|^2 of antenna cycling."""
    coeff = _coefficients(h)
    return float(tx_power_mw * np.mean(np.abs(coeff) ** 2))


def rf_power_sa_subslots(h, tx_power_mw: float) -> np.ndarray:
    """Per-sub-slot RF powers P*|h_m|^2 (full power on one element at a time)."""
    coeff = _coefficients(h)
    return tx_power_mw * np.abs(coeff) ** 2


def harvest(model: EhCircuitModel, p_rf_mw):
    """Harvested power (mW): 0 below sensitivity, eta*p in the linear region,
    eta*saturation above; accepts scalars or arrays."""
    p = np.asarray(p_rf_mw, dtype=float)
    if (p < 0).any():
        raise ValueError("RF power must be >= 0")
    sens = dbm_to_mw(model.sensitivity_dbm)
    sat = dbm_to_mw(model.saturation_dbm)
    out = np.where(p < sens, 0.0, model.efficiency * np.minimum(p, sat))
    return float(out) if np.isscalar(p_rf_mw) or np.ndim(p_rf_mw) == 0 else out


def beacon_rf_power(beacon: PowerBeacon, h) -> float:
    """One beacon's (block-averaged) RF power for one channel realization."""
    if beacon.scheme.kind == "SA":
        return rf_power_sa(h, beacon.tx_power_mw)
    w = scheme_weights(beacon.scheme, beacon.geometry.num_elements)
    return rf_power_aa(h, w, beacon.tx_power_mw)


def grid_point_rf_power(
    beacons: Sequence[PowerBeacon],
    channels: Sequence,
    point=None,
) -> float:
    """Total RF power at a location: beacons send independent signals, so the
    per-beacon scheme powers add. `channels` holds one realization per beacon
    (drawn for that beacon's effective geometry); `point` is accepted for
    interface symmetry with grid evaluation and is not used in the sum."""
    if len(channels) != len(beacons):
        raise ValueError(f"{len(beacons)} beacons but {len(channels)} channel realizations")
    return float(sum(beacon_rf_power(b, h) for b, h in zip(beacons, channels)))


# ---------------------------------------------------------------------------
# orientation search
# ---------------------------------------------------------------------------


class _BeaconCache:
    """Per-(point, beacon) quantities that survive an orientation change."""

    def __init__(self, beacon: PowerBeacon, points: np.ndarray,
                 statistics: Callable, trials: int, seed: int, beacon_index: int):
        geometry = beacon.geometry
        m = geometry.num_elements
        n = points.shape[0]
        self.power_mw = beacon.tx_power_mw
        self.spacing = geometry.element_spacing
        self.num_elements = m
        self.is_sa = beacon.scheme.kind == "SA"
        self.azimuth = np.empty(n)
        self.amp = np.empty(n)  # sqrt(path gain)
        self.c_los = np.empty(n)
        self.c_nlos = np.empty(n)
        weights = None if self.is_sa else scheme_weights(beacon.scheme, m)
        z_list = []
        for p_idx in range(n):
            model = statistics(points[p_idx], geometry)
            self.azimuth[p_idx] = model.azimuth
            self.amp[p_idx] = math.sqrt(model.path_gain)
            k = model.los_factor
            self.c_los[p_idx] = math.sqrt(k / (1.0 + k))
            self.c_nlos[p_idx] = math.sqrt(1.0 / (1.0 + k))
            z = _channel.sample_nlos_block(model, m, stream(seed, p_idx, beacon_index), trials)
            z_list.append(z if self.is_sa else z @ np.conj(weights))
        self.z = np.stack(z_list)  # SA: (n, trials, M); AA: (n, trials)
        self.weights = weights

    def _steering(self, orientation: float) -> np.ndarray:
        """(n, M) steering matrix toward every point for this orientation."""
        m = np.arange(self.num_elements)
        phase = -_TWO_PI * self.spacing * np.sin(self.azimuth - orientation)
        return np.exp(1j * np.outer(phase, m))

    def rf_power(self, orientation: float) -> np.ndarray:
        """(n, trials) RF power draws with the array at `orientation`."""
        a = self._steering(orientation)
        if self.is_sa:
            field = (self.c_los[:, None, None] * a[:, None, :]
                     + self.c_nlos[:, None, None] * self.z)
            mean_sq = np.mean(np.abs(field) ** 2, axis=2)
            return self.power_mw * (self.amp[:, None] ** 2) * mean_sq
        aw = a @ np.conj(self.weights)  # (n,)
        field = self.c_los[:, None] * aw[:, None] + self.c_nlos[:, None] * self.z
        return self.power_mw * (self.amp[:, None] ** 2) * np.abs(field) ** 2


def optimize_rotation(
    beacons: Sequence[PowerBeacon],
    grid_points: np.ndarray,
    statistics: Callable[[np.ndarray, _channel.UlaGeometry], _channel.RicianChannelModel],
    circuit: EhCircuitModel,
    threshold_dbm: float,
    orientation_grid: Sequence[float],
    trials: int,
    seed: int,
    sweeps: int = 3,
) -> np.ndarray:
    """Per-beacon array orientations maximizing coverage, by coordinate ascent.

    Coverage is the fraction of grid points whose mean harvested power (over
    `trials` fading draws, streams keyed by (seed, point, beacon)) reaches
    threshold_dbm. One beacon is optimized at a time over `orientation_grid`
    for `sweeps` passes; a candidate replaces the incumbent only on a strict
    improvement (ties broken by total mean harvested power), so the result is
    never worse than the starting orientations and is deterministic given the
    seed. statistics(point, geometry) supplies the fading model of each
    beacon-to-point link. Returns absolute orientations, aligned with beacons.
    """
    points = np.asarray(grid_points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"grid_points must be (n, 2) coordinates, got {points.shape}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    candidates = [float(o) for o in orientation_grid]
    if not candidates:
        raise ValueError("orientation_grid must be non-empty")
    threshold_mw = dbm_to_mw(threshold_dbm)
    caches = [
        _BeaconCache(b, points, statistics, trials, seed, bi)
        for bi, b in enumerate(beacons)
    ]
    orientations = np.array(
        [effective_geometry(b).orientation for b in beacons], dtype=float
    )

    def score(total_rf):
        means = harvest(circuit, total_rf).mean(axis=1)
        return float((means >= threshold_mw).mean()), float(means.sum())

    rf_each = [c.rf_power(o) for c, o in zip(caches, orientations)]
    total = np.sum(rf_each, axis=0)
    for _ in range(sweeps):
        moved = False
        for b in range(len(beacons)):
            rest = total - rf_each[b]
            best_cov, best_mean = score(rest + rf_each[b])
            best_orientation, best_rf = orientations[b], rf_each[b]
            for cand in candidates:
                rf_cand = caches[b].rf_power(cand)
                cov, mean_sum = score(rest + rf_cand)
                if cov > best_cov or (cov == best_cov and mean_sum > best_mean):
                    best_cov, best_mean = cov, mean_sum
                    best_orientation, best_rf = cand, rf_cand
            if best_orientation != orientations[b]:
                moved = True
            orientations[b] = best_orientation
            rf_each[b] = best_rf
            total = rest + best_rf
        if not moved:
            break
    return orientations
