"""Finite-blocklength reliability: block error rate and minimum latency.

Maps SINR statistics to the shortest blocklength (in channel uses) meeting a
target error probability. The block error rate uses the normal approximation
for a quasi-static channel at a given SINR; latency search averages it over
fading with common random numbers across candidate blocklengths and bisects
on the blocklength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfc

from . import channel as _channel
from .beamforming import PrecodingMatrix
from .montecarlo import stream

_LN2 = math.log(2.0)
_SEMANTICS = ("average", "sinr_outage")


@dataclass(frozen=True)
class FblConfig:
    """Reliability target for short-packet transmission.

    error_semantics selects the feasibility test: "average" requires the
    fading-averaged block error rate to meet target_error; "sinr_outage"
    requires P[n * log2(1 + SINR) < payload_bits] <= target_error.
    """

    payload_bits: int
    target_error: float
    max_blocklength: int = 10 ** 6
    error_semantics: str = "average"

    def __post_init__(self):
        if not (isinstance(self.payload_bits, (int, np.integer)) and self.payload_bits >= 1):
            raise ValueError(f"payload_bits must be an integer >= 1, got {self.payload_bits}")
        if not 0.0 < self.target_error < 1.0:
            raise ValueError(f"target_error must be in (0, 1), got {self.target_error}")
        if not (isinstance(self.max_blocklength, (int, np.integer)) and self.max_blocklength >= 1):
            raise ValueError(
                f"max_blocklength must be an integer >= 1, got {self.max_blocklength}"
            )
        if self.error_semantics not in _SEMANTICS:
            raise ValueError(
                f"error_semantics must be one of {_SEMANTICS}, got {self.error_semantics!r}"
            )


def block_error(sinr, blocklength: int, payload_bits: int):
    """Normal-approximation block error rate at linear SINR s.

    eps = Q((n ln(1+s) - k ln 2 + 0.5 ln n) / sqrt(n V)), V = 1 - (1+s)^-2,
    clamped to [0, 1]; non-positive SINR yields 1.0. Accepts scalar or array
    SINR and returns the matching shape.
    """
    if blocklength < 1:
        raise ValueError(f"blocklength must be >= 1, got {blocklength}")
    if payload_bits < 1:
        raise ValueError(f"payload_bits must be >= 1, got {payload_bits}")
    s = np.asarray(sinr, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    eps = np.ones_like(s)
    pos = s > 0
    if pos.any():
        sp = s[pos]
        dispersion = 1.0 - (1.0 + sp) ** -2
        n = float(blocklength)
        arg = (n * np.log1p(sp) - payload_bits * _LN2 + 0.5 * math.log(n))
        arg /= np.sqrt(n * dispersion)
        eps[pos] = np.clip(0.5 * erfc(arg / math.sqrt(2.0)), 0.0, 1.0)
    return float(eps[0]) if scalar else eps


def min_latency_for_sinr_samples(samples: np.ndarray, config: FblConfig):
    """Shortest blocklength meeting the target for given per-user SINR draws.

    samples: (users, trials) linear SINR values (fixed by common random
    numbers across all candidate blocklengths). Returns the minimal n with
    every user's error measure <= target_error, or None when even
    max_blocklength fails. Deterministic in the multiset of samples: trials
    are sorted before averaging, so trial order cannot change the result.
    """
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValueError("samples must be non-empty")
    s = np.sort(s, axis=1)
    if config.error_semantics == "sinr_outage":
        def feasible(n: int) -> bool:
            rates = n * np.log2(np.clip(1.0 + s, 1.0, None))
            outage = (rates < config.payload_bits).mean(axis=1)
            return bool((outage <= config.target_error).all())
    else:
        def feasible(n: int) -> bool:
            errors = block_error(s, n, config.payload_bits)
            return bool((errors.mean(axis=1) <= config.target_error).all())

    hi = int(config.max_blocklength)
    if not feasible(hi):
        return None
    if feasible(1):
        return 1
    lo = 1  # infeasible; hi stays feasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sinr_samples(
    precoder: PrecodingMatrix,
    models: Sequence[_channel.RicianChannelModel],
    geometry: _channel.UlaGeometry,
    noise_power: float,
    trials: int,
    seed: int,
) -> np.ndarray:
    """(users, trials) instantaneous SINR draws; user i uses stream (seed, i)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    w = precoder.columns
    out = np.empty((len(models), trials))
    for i, model in enumerate(models):
        h = _channel.sample_channel_block(model, geometry, stream(seed, i), trials)
        amps = np.abs(h @ np.conj(w)) ** 2
        signal = amps[:, i]
        interference = amps.sum(axis=1) - signal
        out[i] = signal / (interference + noise_power)
    return out


def min_latency(
    precoder: PrecodingMatrix,
    models: Sequence[_channel.RicianChannelModel],
    geometry: _channel.UlaGeometry,
    noise_power: float,
    config: FblConfig,
    trials: int,
    seed: int,
):
    """Shortest blocklength such that every user meets the reliability target.

    Feasibility per config.error_semantics, averaged over `trials` fading
    draws shared across all candidate blocklengths (common random numbers);
    returns None when max_blocklength is still infeasible.
    """
    samples = sinr_samples(precoder, models, geometry, noise_power, trials, seed)
    return min_latency_for_sinr_samples(samples, config)
