"""Projective and coarse-grained momentum measurements on simulated runs.

Every physical run would re-prepare and re-evolve the state before a single
projective measurement.  Identical preparations give identical final states,
so the simulation evolves once and draws all outcomes from the final
distribution; outcomes are statistically the same.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qsaw import rng
from qsaw.errors import NotNormalized
from qsaw.params import MapParams
from qsaw.propagator import (
    StateVector,
    evolve,
    init_momentum_state,
    momentum_levels,
    probabilities,
)

NORM_TOL = 1e-6
# draws per RNG stream; fixed so results do not depend on worker layout
BATCH = 8192


@dataclass
class MeasurementHistogram:
    """Counts of coarse-grained momentum outcomes.

    Bin ``b`` collects storage indices ``b*bin_width .. (b+1)*bin_width - 1``,
    i.e. momenta ``bin_low_m(b) .. bin_high_m(b)``.
    """

    n: int
    bin_width: int
    counts: np.ndarray
    n_runs: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_width < 1 or self.bin_width & (self.bin_width - 1):
            raise ValueError(f"bin width must be a power of two, got {self.bin_width}")
        if self.counts.shape != (2**self.n // self.bin_width,):
            raise ValueError("counts length does not match register and bin width")
        if int(self.counts.sum()) != self.n_runs:
            raise ValueError("counts do not sum to n_runs")

    @property
    def dropped_bits(self) -> int:
        return self.bin_width.bit_length() - 1

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def bin_low_m(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_width - 2**self.n // 2

    def bin_high_m(self) -> np.ndarray:
        return self.bin_low_m() + self.bin_width - 1

    def bin_centers_m(self) -> np.ndarray:
        return self.bin_low_m() + (self.bin_width - 1) / 2

    def empirical_probabilities(self) -> np.ndarray:
        return self.counts / self.n_runs

    def count_map(self) -> dict[int, int]:
        return {int(b): int(c) for b, c in enumerate(self.counts) if c}


def _checked_probabilities(psi: StateVector) -> np.ndarray:
    W = probabilities(psi)
    total = W.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise NotNormalized(f"state norm^2 = {total}")
    return W / total


def coarse_marginal(W: np.ndarray, dropped_bits: int) -> np.ndarray:
    """Probability of each bin when the ``dropped_bits`` least significant qubits are ignored."""
    W = np.asarray(W, dtype=float)
    n = int(math.log2(len(W)))
    if not 0 <= dropped_bits <= n:
        raise ValueError(f"dropped_bits must be in [0, {n}]")
    return W.reshape(-1, 2**dropped_bits).sum(axis=1)


def _inverse_cdf(P: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, len(P) - 1)


def sample_momentum(psi: StateVector, generator: np.random.Generator, size: int | None = None):
    """Projective measurement in the momentum basis; returns level ``m`` (or an array)."""
    W = _checked_probabilities(psi)
    u = generator.random(size)
    j = _inverse_cdf(W, np.atleast_1d(u))
    m = j - psi.params.N // 2
    return int(m[0]) if size is None else m


def coarse_sample(psi: StateVector, dropped_bits: int, generator: np.random.Generator,
                  size: int | None = None):
    """Measure only the ``n - dropped_bits`` most significant qubits; returns a bin index."""
    P = coarse_marginal(_checked_probabilities(psi), dropped_bits)
    b = _inverse_cdf(P, np.atleast_1d(generator.random(size)))
    return int(b[0]) if size is None else b


def draw_counts(P: np.ndarray, n_draws: int, seed: int, purpose: str = rng.MEASURE) -> np.ndarray:
    """Histogram of ``n_draws`` inverse-CDF draws, in fixed per-stream batches."""
    counts = np.zeros(len(P), dtype=np.int64)
    for batch, start in enumerate(range(0, n_draws, BATCH)):
        size = min(BATCH, n_draws - start)
        u = rng.stream(seed, purpose, batch).random(size)
        counts += np.bincount(_inverse_cdf(P, u), minlength=len(P))
    return counts


def auto_dropped_bits(estimated_width: float, n: int) -> int:
    """Coarse graining from a first width estimate: ``floor(log2(max(1, w/4)))``."""
    b = int(math.floor(math.log2(max(1.0, estimated_width / 4))))
    return min(b, n)


def histogram_from_state(psi: StateVector, n_runs: int, dropped_bits: int, seed: int,
                         metadata: dict | None = None) -> MeasurementHistogram:
    if n_runs < 1:
        raise ValueError("need at least one run")
    P = coarse_marginal(_checked_probabilities(psi), dropped_bits)
    counts = draw_counts(P, n_runs, seed)
    return MeasurementHistogram(psi.params.n, 2**dropped_bits, counts, n_runs, metadata or {})


def run_measurement_experiment(
    params: MapParams,
    t: int,
    n_runs: int,
    dropped_bits: int | None = None,
    seed: int = 0,
    final_state: StateVector | None = None,
) -> MeasurementHistogram:
    """Evolve ``|m0>`` for ``t`` steps, then simulate ``n_runs`` measurements.

    With ``dropped_bits=None`` the two-stage protocol is used: a first batch
    of ``max(100, n_runs // 10)`` full-resolution runs estimates the width
    ``sqrt(<(dm)**2>)`` and fixes the coarse graining through
    :func:`auto_dropped_bits`; the histogram then holds ``n_runs`` further
    runs.  ``final_state`` skips the evolution when the caller already has it.
    """
    if n_runs < 1:
        raise ValueError("need at least one run")
    psi = final_state if final_state is not None else evolve(init_momentum_state(params), t)
    meta = {"t": t, "n_runs": n_runs, "seed": seed, "params": params.as_dict()}
    if dropped_bits is None:
        n_first = max(100, n_runs // 10)
        W = _checked_probabilities(psi)
        first = draw_counts(W, n_first, seed, purpose="measure-stage1")
        m = momentum_levels(params.N)
        mean = np.dot(first, m) / n_first
        width = math.sqrt(max(0.0, np.dot(first, (m - mean) ** 2) / n_first))
        dropped_bits = auto_dropped_bits(width, params.n)
        meta.update(stage1_runs=n_first, stage1_width=width)
    meta["dropped_bits"] = dropped_bits
    return histogram_from_state(psi, n_runs, dropped_bits, seed, meta)
