"""Classical sawtooth map, its tangent map, and trajectory ensembles.

In the rescaled variables ``(J, theta)`` one kick reads::

    J'     = J + K*(theta - pi)
    theta' = theta + J'            (mod 2*pi)

On the torus ``J`` is also reduced into ``[-pi*L, pi*L)``; on the cylinder it
is left unbounded.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qsaw import rng
from qsaw.errors import InvalidEnsemble, InvalidHorizon
from qsaw.params import TORUS, MapParams

TWO_PI = 2 * math.pi

RENORM_EVERY = 10
# fixed work unit for ensembles, independent of the thread count
CHUNK = 4096


@dataclass(frozen=True)
class PhasePoint:
    J: float
    theta: float


@dataclass(frozen=True)
class TangentVector:
    dJ: float
    dtheta: float

    def __post_init__(self):
        if self.dJ == 0 and self.dtheta == 0:
            raise ValueError("tangent vector must be non-zero")

    @property
    def norm(self) -> float:
        return math.hypot(self.dJ, self.dtheta)


@dataclass(frozen=True)
class EnsembleMoments:
    t: int
    mean_J: float
    var_J: float
    sample_count: int


def wrap_angle(theta):
    """Floor-based reduction into ``[0, 2*pi)``, also for negative input."""
    theta = np.asarray(theta, dtype=float)
    r = theta - TWO_PI * np.floor(theta / TWO_PI)
    # rounding can land exactly on 2*pi for tiny negative input
    return np.where(r >= TWO_PI, 0.0, r)


def wrap_action(J, L: int):
    """Reduce ``J`` into ``[-pi*L, pi*L)``."""
    J = np.asarray(J, dtype=float)
    period = TWO_PI * L
    r = J - period * np.floor((J + math.pi * L) / period)
    return np.where(r >= math.pi * L, r - period, r)


def map_arrays(J, theta, K: float, boundary: str = "cylinder", L: int | None = None):
    """One kick applied elementwise to arrays of actions and angles."""
    J_new = J + K * (theta - math.pi)
    theta_new = wrap_angle(theta + J_new)
    if boundary == TORUS:
        J_new = wrap_action(J_new, L)
    return J_new, theta_new


def step_map(p: PhasePoint, K: float, boundary: str = "cylinder", L: int | None = None) -> PhasePoint:
    """Image of ``p`` under one map iteration."""
    if boundary == TORUS and L is None:
        raise ValueError("torus boundary needs L")
    J, theta = map_arrays(p.J, p.theta, K, boundary, L)
    return PhasePoint(float(J), float(theta))


def stability_matrix(K: float) -> np.ndarray:
    return np.array([[1.0, K], [1.0, 1.0 + K]])


def tangent_step(v: TangentVector, K: float) -> TangentVector:
    """Linearized map; the matrix does not depend on the phase-space point."""
    return TangentVector(v.dJ + K * v.dtheta, v.dJ + (1.0 + K) * v.dtheta)


def stability_eigenvalues(K: float) -> tuple[complex, complex]:
    """``mu_pm = (2 + K +- sqrt(K**2 + 4K)) / 2``."""
    root = cmath.sqrt(K * K + 4 * K)
    return (2 + K + root) / 2, (2 + K - root) / 2


def lyapunov_exponent(K: float, t_max: int, v0: TangentVector | None = None) -> float:
    """Finite-time maximal Lyapunov exponent from the tangent map.

    The tangent vector is rescaled to unit norm every ``RENORM_EVERY`` steps
    and the logarithms of the discarded norms are accumulated.
    """
    if t_max < 1:
        raise InvalidHorizon(f"t_max must be >= 1, got {t_max}")
    v0 = v0 or TangentVector(1.0, 0.0)
    M = stability_matrix(K)
    v = np.array([v0.dJ, v0.dtheta], dtype=float)
    log_growth = -math.log(np.hypot(*v))
    for t in range(1, t_max + 1):
        v = M @ v
        if t % RENORM_EVERY == 0 or t == t_max:
            norm = np.hypot(*v)
            log_growth += math.log(norm)
            v /= norm
    return log_growth / t_max


def analytic_lyapunov(K: float) -> float:
    """``ln mu_+`` for K > 0, ``ln|mu_-|`` for K < -4, zero in between."""
    if -4 <= K <= 0:
        return 0.0
    mu_p, mu_m = stability_eigenvalues(K)
    return math.log(abs(mu_p)) if K > 0 else math.log(abs(mu_m))


def initial_ensemble(params: MapParams, start: int, stop: int, seed: int):
    """Trajectories ``start..stop-1``: ``J = T*m0`` and uniform random phases."""
    u = rng.uniforms_per_stream(seed, rng.ENSEMBLE, start, stop)
    J = np.full(stop - start, params.J0)
    return J, TWO_PI * u


def _evolve_chunk(params: MapParams, start: int, stop: int, seed: int, times: Sequence[int]):
    J, theta = initial_ensemble(params, start, stop, seed)
    out = np.empty((len(times), stop - start))
    t = 0
    for i, target in enumerate(times):
        while t < target:
            J, theta = map_arrays(J, theta, params.K, params.boundary, params.L)
            t += 1
        out[i] = J
    return out


def ensemble_snapshots(
    params: MapParams,
    n_traj: int,
    seed: int,
    record_times: Sequence[int],
    threads: int = 1,
) -> np.ndarray:
    """Actions of every trajectory at each recorded time, shape ``(times, n_traj)``.

    Trajectories are split into fixed chunks of ``CHUNK``; each chunk is
    evolved independently (optionally on a thread pool) and results are
    stitched back in trajectory order, so output is identical for any
    ``threads``.
    """
    if n_traj < 2:
        raise InvalidEnsemble(f"need at least 2 trajectories, got {n_traj}")
    times = [int(t) for t in record_times]
    if any(b < a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
        raise ValueError("record_times must be sorted and non-negative")
    bounds = [(s, min(s + CHUNK, n_traj)) for s in range(0, n_traj, CHUNK)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _evolve_chunk(params, b[0], b[1], seed, times), bounds))
    else:
        parts = [_evolve_chunk(params, a, b, seed, times) for a, b in bounds]
    return np.concatenate(parts, axis=1)


def ensemble_evolve(
    params: MapParams,
    n_traj: int,
    t_max: int,
    seed: int,
    record_times: Sequence[int] | None = None,
    threads: int = 1,
) -> list[EnsembleMoments]:
    """First and second moments of ``J`` at each recorded time."""
    if record_times is None:
        record_times = range(t_max + 1)
    times = [int(t) for t in record_times]
    if times and times[-1] > t_max:
        raise ValueError("record_times must lie within [0, t_max]")
    snaps = ensemble_snapshots(params, n_traj, seed, times, threads)
    return [
        EnsembleMoments(t, float(np.mean(row)), float(np.var(row)), n_traj)
        for t, row in zip(times, snaps)
    ]
