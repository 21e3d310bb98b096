"""Correlated Rician MISO channel model for a uniform linear array.

A channel draw is

    h = sqrt(g) * ( sqrt(kappa/(1+kappa)) * a(theta) + sqrt(1/(1+kappa)) * R^{1/2} z ),

with a(theta) the ULA steering vector, R the receive-side spatial correlation,
z a circularly-symmetric complex standard normal vector and g the linear path
gain. The second moment is then

    E[h h^H] = g * ( kappa/(1+kappa) * a a^H + 1/(1+kappa) * R ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import db_to_linear

# Far-field guard: distances below this are clamped before the log-distance law.
D_MIN_M = 1.0

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class UlaGeometry:
    """Uniform linear array: element count, spacing (wavelengths), boresight
    azimuth (radians) and position in the plane (meters)."""

    num_elements: int
    element_spacing: float = 0.5
    orientation: float = 0.0
    position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.element_spacing > 0:
            raise ValueError(f"element_spacing must be > 0, got {self.element_spacing}")
        # normalize boresight azimuth into [0, 2*pi)
        object.__setattr__(self, "orientation", float(self.orientation) % _TWO_PI)
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class RicianChannelModel:
    """Statistical description of one link: linear LoS factor kappa, azimuth of
    the link relative to the global frame (radians), spatial correlation R and
    path loss in dB."""

    los_factor: float
    azimuth: float
    correlation: np.ndarray
    path_loss_db: float = 0.0

    def __post_init__(self):
        if not self.los_factor >= 0:
            raise ValueError(f"los_factor must be >= 0, got {self.los_factor}")
        if not np.isfinite(self.path_loss_db):
            # negative values are allowed: calibrated setups express a target
            # link gain > 1 as a negative loss
            raise ValueError(f"path_loss_db must be finite, got {self.path_loss_db}")
        R = np.asarray(self.correlation, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"correlation must be square, got shape {R.shape}")
        if np.max(np.abs(R - R.conj().T)) > 1e-12:
            raise ValueError("correlation must be Hermitian within 1e-12")
        if np.max(np.abs(np.diag(R).real - 1.0)) > 1e-12 or np.max(np.abs(np.diag(R).imag)) > 1e-12:
            raise ValueError("correlation diagonal must be 1 within 1e-12")
        w = np.linalg.eigvalsh(R)
        if w.min() < -1e-9:
            raise ValueError(f"correlation must be PSD, min eigenvalue {w.min():.3e}")
        object.__setattr__(self, "correlation", R)

    @property
    def path_gain(self) -> float:
        """Linear amplitude-squared gain 10^(-path_loss_db/10)."""
        return float(db_to_linear(-self.path_loss_db))


@dataclass(frozen=True)
class ChannelRealization:
    """One instantaneous channel vector (amplitude gains including path loss)."""

    coefficients: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.coefficients, dtype=complex)
        if h.ndim != 1:
            raise ValueError(f"coefficients must be a vector, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", h)


def steering_vector(geometry: UlaGeometry, azimuth: float) -> np.ndarray:
    """ULA steering vector for a link at the given azimuth.

    Entry m (0-based) is exp(-j*2*pi*spacing*m*sin(azimuth - orientation)); the
    first entry is always 1 and all entries have unit modulus.
    """
    m = np.arange(geometry.num_elements)
    phase = _TWO_PI * geometry.element_spacing * np.sin(azimuth - geometry.orientation)
    return np.exp(-1j * phase * m)


def exponential_correlation(num_elements: int, r: float) -> np.ndarray:
    """Exponential spatial correlation matrix, entry (i,j) = r^|i-j|."""
    if not (0.0 <= r < 1.0):
        raise ValueError(f"correlation parameter must be in [0, 1), got {r}")
    idx = np.arange(num_elements)
    return r ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def path_loss_log_distance(d: float, exponent: float, fixed_loss_db: float) -> float:
    """Log-distance path loss in dB: fixed_loss_db + 10*exponent*log10(d).

    Distances below the 1 m far-field guard are clamped (no failure).
    """
    d = np.maximum(np.asarray(d, dtype=float), D_MIN_M)
    out = fixed_loss_db + 10.0 * exponent * np.log10(d)
    return float(out) if out.ndim == 0 else out


def correlation_sqrt(correlation: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root of a correlation matrix via eigendecomposition.

    Eigenvalues in [-1e-9, 0) are clipped to 0; anything below -1e-9 is an error.
    """
    w, v = np.linalg.eigh(np.asarray(correlation, dtype=complex))
    if w.min() < -1e-9:
        raise ValueError(f"correlation matrix not PSD: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def second_moment(model: RicianChannelModel, geometry: UlaGeometry) -> np.ndarray:
    """Closed-form E[h h^H] = g*(kappa/(1+kappa) a a^H + 1/(1+kappa) R)."""
    a = steering_vector(geometry, model.azimuth)
    k = model.los_factor
    los = (k / (1.0 + k)) * np.outer(a, a.conj())
    nlos = (1.0 / (1.0 + k)) * model.correlation
    return model.path_gain * (los + nlos)


def sample_nlos_block(
    model: RicianChannelModel,
    num_elements: int,
    rng: np.random.Generator,
    trials: int,
) -> np.ndarray:
    """Draw `trials` correlated scattered-component vectors as (trials, M).

    Each draw consumes 2*M standard normals contiguously, so a block of n
    draws uses exactly the same normals as n successive single draws from the
    same stream (bit-identical without correlation mixing; correlated draws
    agree to rounding because the mixing matmul may batch rows differently).
    """
    if model.correlation.shape[0] != num_elements:
        raise ValueError(
            f"correlation is {model.correlation.shape[0]}x{model.correlation.shape[0]} "
            f"but geometry has {num_elements} elements"
        )
    zr = rng.standard_normal((trials, 2, num_elements))
    z = (zr[:, 0, :] + 1j * zr[:, 1, :]) / math.sqrt(2.0)
    if not np.allclose(model.correlation, np.eye(num_elements)):
        z = z @ correlation_sqrt(model.correlation).T  # (R^{1/2} z) per row
    return z


def combine_rician(
    model: RicianChannelModel, geometry: UlaGeometry, nlos: np.ndarray
) -> np.ndarray:
    """Assemble channel vectors from pre-drawn scattered components.

    h = sqrt(g) * (sqrt(kappa/(1+kappa)) a + sqrt(1/(1+kappa)) z) row-wise;
    splitting the draw from the assembly lets callers reuse the same fading
    draws under different array orientations.
    """
    a = steering_vector(geometry, model.azimuth)
    k = model.los_factor
    h = math.sqrt(k / (1.0 + k)) * a + math.sqrt(1.0 / (1.0 + k)) * nlos
    return math.sqrt(model.path_gain) * h


def sample_channel_block(
    model: RicianChannelModel,
    geometry: UlaGeometry,
    rng: np.random.Generator,
    trials: int,
) -> np.ndarray:
    """Draw `trials` iid channel vectors as a (trials, M) array."""
    z = sample_nlos_block(model, geometry.num_elements, rng, trials)
    return combine_rician(model, geometry, z)


def sample_channel(
    model: RicianChannelModel, geometry: UlaGeometry, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one channel realization h (includes path loss)."""
    return ChannelRealization(sample_channel_block(model, geometry, rng, 1)[0])
