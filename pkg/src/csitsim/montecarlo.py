"""Deterministic, reproducible Monte Carlo engine.

Trial t of a run with seed s draws from the dedicated stream (s, t), so an
estimate does not depend on evaluation order or on how trials are distributed
over workers. Aggregation uses pairwise summation (numpy's reduction order on a
fixed array), which keeps results bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Independent generator keyed by (seed, *ids) via SeedSequence spawning."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(i) for i in ids]]))


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo point estimate with its standard error."""

    mean: float
    std_error: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")


def _gather_samples(
    sampler: Callable[[int, np.random.Generator], float],
    trials: int,
    seed: int,
    workers: int,
) -> np.ndarray:
    """Evaluate sampler(t, stream(seed, t)) for t in range(trials) into a fixed
    array; worker count only affects scheduling, never values or order."""
    samples = np.empty(trials, dtype=float)

    def run_chunk(lo: int, hi: int) -> None:
        for t in range(lo, hi):
            samples[t] = sampler(t, stream(seed, t))

    if workers <= 1 or trials < 2 * workers:
        run_chunk(0, trials)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_chunk, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for f in futures:
                f.result()
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise ValueError(f"non-finite sample at trial {int(bad[0])}")
    return samples


def estimate_from_samples(samples: np.ndarray, seed: int) -> McEstimate:
    """Mean and standard error s/sqrt(n) of a fixed sample array (pairwise sum)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"non-finite sample at trial {int(np.flatnonzero(~np.isfinite(samples))[0])}")
    mean = float(np.add.reduce(samples) / n)
    if n == 1:
        se = 0.0
    else:
        se = float(math.sqrt(np.add.reduce((samples - mean) ** 2) / (n - 1)) / math.sqrt(n))
    return McEstimate(mean=mean, std_error=se, trials=n, seed=int(seed))


def mc_mean(
    sampler: Callable[[int, np.random.Generator], float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> McEstimate:
    """Sample mean of sampler(t, rng_t) over `trials` trials.

    sampler receives the trial index and that trial's private stream (seed, t).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    samples = _gather_samples(sampler, trials, seed, workers)
    return estimate_from_samples(samples, seed)


def outage_probability(
    sampler: Callable[[int, np.random.Generator], float],
    threshold: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> McEstimate:
    """Fraction of trials with sample < threshold, with binomial standard error
    sqrt(p*(1-p)/trials)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    samples = _gather_samples(sampler, trials, seed, workers)
    return outage_from_samples(samples, threshold, seed)


def outage_from_samples(samples: np.ndarray, threshold: float, seed: int) -> McEstimate:
    """Binomial outage estimate from a fixed sample array."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 1:
        raise ValueError("need at least one sample")
    p = float(np.add.reduce((samples < threshold).astype(float)) / n)
    se = math.sqrt(p * (1.0 - p) / n)
    return McEstimate(mean=p, std_error=se, trials=n, seed=int(seed))


def log10_outage_floor(trials: int) -> float:
    """Reporting floor for log10(outage) when zero outages are observed."""
    return -(math.log10(trials) + 1.0)


def log10_outage(estimate: McEstimate) -> tuple[float, bool]:
    """log10 of an outage estimate with the zero-count floor.

    Returns (value, below_resolution): zero observed outages map to the floor
    -(log10 trials + 1) and are flagged below resolution.
    """
    if estimate.mean <= 0.0:
        return log10_outage_floor(estimate.trials), True
    return math.log10(estimate.mean), False
