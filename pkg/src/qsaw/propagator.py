"""Spectral (split-operator) quantum sawtooth map on ``N = 2**n`` levels.

One map iteration is ``psi -> U_T U_k psi`` with the kick
``U_k = exp(i k (theta - pi)**2 / 2)`` diagonal on the angle grid
``theta_j = 2*pi*j/N`` and the free rotation ``U_T = exp(-i T m**2 / 2)``
diagonal on momentum levels ``m = j - N/2``.  The two bases are linked by a
unitary FFT with a ``(-1)**j`` twist that centres ``m = 0`` at storage index
``N/2``::

    psi(theta_l) = N**-0.5 * sum_m psihat(m) * exp(i m theta_l)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from qsaw.errors import WrongBasis
from qsaw.params import MapParams

MOMENTUM = "momentum"
ANGLE = "angle"
BASES = (MOMENTUM, ANGLE)


@dataclass
class StateVector:
    """``N`` complex amplitudes tagged with their representation."""

    amplitudes: np.ndarray
    basis: str
    params: MapParams

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.amplitudes.shape != (self.params.N,):
            raise ValueError(
                f"expected {self.params.N} amplitudes, got shape {self.amplitudes.shape}")

    @property
    def n(self) -> int:
        return self.params.n

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy(), self.basis, self.params)

    def _replace(self, amplitudes, basis=None) -> StateVector:
        return StateVector(amplitudes, basis or self.basis, self.params)


def _require(psi: StateVector, basis: str):
    if psi.basis != basis:
        raise WrongBasis(f"expected a {basis}-basis state, got {psi.basis}")


def momentum_levels(N: int) -> np.ndarray:
    return np.arange(N) - N // 2


def angle_grid(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(N) / N


def _twist(N: int) -> np.ndarray:
    return np.where(np.arange(N) % 2 == 0, 1.0, -1.0)


def kick_phases(N: int, k: float) -> np.ndarray:
    return np.exp(0.5j * k * (angle_grid(N) - np.pi) ** 2)


def free_phases(N: int, T: float) -> np.ndarray:
    return np.exp(-0.5j * T * momentum_levels(N).astype(float) ** 2)


def init_momentum_state(params: MapParams) -> StateVector:
    """Momentum eigenstate ``|m0>``."""
    amps = np.zeros(params.N, dtype=complex)
    amps[params.m0_index] = 1.0
    return StateVector(amps, MOMENTUM, params)


def to_angle_basis(psi: StateVector) -> StateVector:
    _require(psi, MOMENTUM)
    N = psi.params.N
    return psi._replace(_twist(N) * np.fft.ifft(psi.amplitudes, norm="ortho"), ANGLE)


def to_momentum_basis(psi: StateVector) -> StateVector:
    _require(psi, ANGLE)
    N = psi.params.N
    return psi._replace(np.fft.fft(_twist(N) * psi.amplitudes, norm="ortho"), MOMENTUM)


def apply_kick(psi: StateVector, inverse: bool = False) -> StateVector:
    _require(psi, ANGLE)
    phases = kick_phases(psi.params.N, psi.params.k)
    return psi._replace(psi.amplitudes * (phases.conj() if inverse else phases))


def apply_free(psi: StateVector, inverse: bool = False) -> StateVector:
    _require(psi, MOMENTUM)
    phases = free_phases(psi.params.N, psi.params.T)
    return psi._replace(psi.amplitudes * (phases.conj() if inverse else phases))


def floquet_step(psi: StateVector) -> StateVector:
    """One map iteration on a momentum-basis state."""
    _require(psi, MOMENTUM)
    return apply_free(to_momentum_basis(apply_kick(to_angle_basis(psi))))


def floquet_inverse_step(psi: StateVector) -> StateVector:
    """Exact inverse of :func:`floquet_step`."""
    _require(psi, MOMENTUM)
    undone = to_angle_basis(apply_free(psi, inverse=True))
    return to_momentum_basis(apply_kick(undone, inverse=True))


def evolve(psi: StateVector, steps: int) -> StateVector:
    for _ in range(steps):
        psi = floquet_step(psi)
    return psi


def trajectory(psi: StateVector, steps: int) -> Iterator[StateVector]:
    """Yield the state after each of ``steps`` iterations."""
    for _ in range(steps):
        psi = floquet_step(psi)
        yield psi


def probabilities(psi: StateVector) -> np.ndarray:
    """``W_m = |<m|psi>|**2`` in storage order (index ``j = m + N/2``)."""
    _require(psi, MOMENTUM)
    return np.abs(psi.amplitudes) ** 2


def time_averaged_probabilities(params: MapParams, t_start: int, t_stop: int) -> np.ndarray:
    """``W_m`` from ``|m0>`` averaged pointwise over steps ``t_start..t_stop`` inclusive."""
    if not 0 <= t_start <= t_stop:
        raise ValueError("need 0 <= t_start <= t_stop")
    psi = evolve(init_momentum_state(params), t_start)
    acc = probabilities(psi).copy()
    for _ in range(t_stop - t_start):
        psi = floquet_step(psi)
        acc += probabilities(psi)
    return acc / (t_stop - t_start + 1)


def momentum_variance(W: np.ndarray) -> float:
    """``<(m - <m>)**2>`` of a storage-order distribution."""
    m = momentum_levels(len(W)).astype(float)
    mean = np.dot(W, m)
    return float(np.dot(W, (m - mean) ** 2))


def floquet_matrix(params: MapParams, basis: str = MOMENTUM) -> np.ndarray:
    """Dense Floquet operator, built column by column from basis states."""
    N = params.N
    U = np.empty((N, N), dtype=complex)
    for col in range(N):
        e = np.zeros(N, dtype=complex)
        e[col] = 1.0
        if basis == MOMENTUM:
            U[:, col] = floquet_step(StateVector(e, MOMENTUM, params)).amplitudes
        else:
            out = floquet_step(to_momentum_basis(StateVector(e, ANGLE, params)))
            U[:, col] = to_angle_basis(out).amplitudes
    return U
