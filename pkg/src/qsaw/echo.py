"""Scattering circuit, Loschmidt echo and correlation functions.

The scattering circuit puts an ancilla in ``|0>``, applies H, a W controlled
by the ancilla, and H again.  Reading the ancilla in the computational basis
gives ``<sigma_z> = Re Tr(W rho)``; applying S^dagger before the final H
rotates the y axis onto z, so that run gives ``<sigma_y> = Im Tr(W rho)``.  For ``rho = |psi><psi|`` and ``W = (U_eps^dagger)^t U^t`` the
fidelity is ``sigma_z**2 + sigma_y**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qsaw import rng
from qsaw.analysis import FitReport
from qsaw.errors import WidthMismatch
from qsaw.gates import (
    CPHASE,
    HADAMARD,
    PHASE,
    GateList,
    apply_inplace,
    build_floquet_circuit,
)
from qsaw.params import MapParams
from qsaw.propagator import (
    StateVector,
    evolve,
    init_momentum_state,
    to_angle_basis,
)

METHODS = ("direct", "scattering_exact", "scattering_sampled")


@dataclass(frozen=True)
class ScatteringResult:
    sigma_z: float
    sigma_y: float
    fidelity: float
    n_samples: int
    sigma_z_err: float = 0.0
    sigma_y_err: float = 0.0

    @property
    def trace(self) -> complex:
        """Estimate of ``Tr(W rho)``."""
        return complex(self.sigma_z, self.sigma_y)


def _amplitudes(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def ancilla_zero_probabilities(state, W: GateList) -> tuple[float, float]:
    """Probability of ancilla outcome 0 in the z-readout and y-readout runs."""
    psi = _amplitudes(state)
    n = W.width
    if psi.shape != (2**n,):
        raise WidthMismatch(f"state of {psi.size} amplitudes vs W of width {n}")
    # ancilla is the last axis; H on |0> gives equal branches
    branch0 = psi.reshape((2,) * n) * math.sqrt(0.5)
    branch1 = branch0.copy()
    apply_inplace(branch1, W)
    # final H on the ancilla, optionally preceded by S^dagger (phase -i on |1>)
    p0_z = 0.25 * float(np.sum(np.abs(branch0 + branch1) ** 2)) * 2
    p0_y = 0.25 * float(np.sum(np.abs(branch0 - 1j * branch1) ** 2)) * 2
    return p0_z, p0_y


def scattering_expectation(rho_state, W: GateList, n_samples: int = 0,
                           seed: int = 0) -> ScatteringResult:
    """Ancilla expectations of the scattering circuit for ``rho = |psi><psi|``.

    ``n_samples = 0`` returns exact expectations.  Otherwise the z and y
    readouts are each simulated with ``n_samples`` single-shot ancilla
    measurements drawn from independent counter-based streams.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    p0_z, p0_y = ancilla_zero_probabilities(rho_state, W)
    p0_z = min(max(p0_z, 0.0), 1.0)
    p0_y = min(max(p0_y, 0.0), 1.0)
    if n_samples == 0:
        z, y = 2 * p0_z - 1, 2 * p0_y - 1
        return ScatteringResult(z, y, z * z + y * y, 0)
    zeros_z = rng.stream(seed, rng.SCATTER, 0).binomial(n_samples, p0_z)
    zeros_y = rng.stream(seed, rng.SCATTER, 1).binomial(n_samples, p0_y)
    z = 2 * zeros_z / n_samples - 1
    y = 2 * zeros_y / n_samples - 1
    ez = math.sqrt(max(1 - z * z, 0.0) / n_samples)
    ey = math.sqrt(max(1 - y * y, 0.0) / n_samples)
    return ScatteringResult(z, y, z * z + y * y, n_samples, ez, ey)


def scattering_gate_counts(W: GateList) -> dict:
    """Gate tally of the scattering circuit built around ``W``.

    Every gate of W becomes its ancilla-controlled version; a global phase
    becomes one phase gate on the ancilla and a wire relabelling needs
    controlled swaps.  The y readout adds one S^dagger gate.
    """
    c = W.counts()
    swaps = 0
    seen = set()
    for start in range(W.width):
        if start in seen:
            continue
        length, q = 0, start
        while q not in seen:
            seen.add(q)
            q = W.order[q]
            length += 1
        swaps += length - 1
    return {
        "ancilla_H": 2,
        "controlled_H": c[HADAMARD],
        "controlled_P": c[PHASE],
        "doubly_controlled_P": c[CPHASE],
        "ancilla_P": int(W.global_phase != 0),
        "controlled_swap": swaps,
        "y_readout_Sdg": 1,
    }


def echo_circuit(params: MapParams, epsilon: float, t: int) -> GateList:
    """``W = (U_eps^dagger)^t U^t`` as a gate list: t forward maps, then t perturbed ones undone."""
    forward = build_floquet_circuit(params).repeat(t)
    perturbed = build_floquet_circuit(params.with_kick(params.k + epsilon)).repeat(t)
    return forward.then(perturbed.adjoint())


def fidelity(params: MapParams, epsilon: float, t: int, method: str = "direct",
             n_samples: int = 0, seed: int = 0) -> FitReport:
    """Loschmidt echo ``|<psi|(U_eps^dagger)^t U^t|psi>|**2`` from ``|m0>``, with ``k -> k + eps``."""
    if epsilon < 0 or t < 0:
        raise ValueError("need epsilon >= 0 and t >= 0")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    psi0 = init_momentum_state(params)
    if method == "direct":
        a = evolve(psi0, t)
        b = evolve(init_momentum_state(params.with_kick(params.k + epsilon)), t)
        f = abs(np.vdot(b.amplitudes, a.amplitudes)) ** 2
        return FitReport("fidelity", float(f), 0.0, (t,), 1, 0.0,
                         {"method": method, "epsilon": epsilon})
    samples = n_samples if method == "scattering_sampled" else 0
    if method == "scattering_sampled" and samples < 1:
        raise ValueError("scattering_sampled needs n_samples >= 1")
    res = scattering_expectation(to_angle_basis(psi0), echo_circuit(params, epsilon, t),
                                 samples, seed)
    err = math.hypot(2 * res.sigma_z * res.sigma_z_err, 2 * res.sigma_y * res.sigma_y_err)
    return FitReport("fidelity", res.fidelity, err, (t,), 1, 0.0,
                     {"method": method, "epsilon": epsilon, "sigma_z": res.sigma_z,
                      "sigma_y": res.sigma_y, "n_samples": samples})


def correlation_circuit(A: GateList, B: GateList, U: GateList, t: int) -> GateList:
    """``W = (U^dagger)^t A^dagger U^t B`` (B acts first)."""
    if not A.width == B.width == U.width:
        raise WidthMismatch("A, B and U must have the same width")
    Ut = U.repeat(t)
    return B.then(Ut).then(A.adjoint()).then(Ut.adjoint())


def correlation_expectation(rho_state, A: GateList, B: GateList, U: GateList, t: int,
                            exact: bool = True, n_samples: int = 0, seed: int = 0) -> complex:
    """``C(t) = <psi|(U^dagger)^t A^dagger U^t B|psi>`` read out through the scattering circuit."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if not exact and n_samples < 1:
        raise ValueError("sampled estimate needs n_samples >= 1")
    res = scattering_expectation(rho_state, correlation_circuit(A, B, U, t),
                                 0 if exact else n_samples, seed)
    return res.trace
