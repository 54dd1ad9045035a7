import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsaw.errors import WidthMismatch
from qsaw.gates import (
    CPHASE,
    HADAMARD,
    PHASE,
    Gate,
    GateList,
    apply_gates,
    build_floquet_circuit,
    build_qft_circuit,
    build_uk_circuit,
    build_ut_circuit,
    circuit_matrix,
    evolve_with_circuit,
    gate_verify,
    max_error_up_to_phase,
    uk_pair_factor,
)
from qsaw.params import derive_params
from qsaw.propagator import ANGLE, evolve, floquet_matrix, init_momentum_state, kick_phases


def random_circuit(draw, width, length):
    gates = []
    for _ in range(length):
        kind = draw(st.sampled_from([HADAMARD, PHASE, CPHASE]))
        if kind == HADAMARD:
            gates.append(Gate(HADAMARD, (draw(st.integers(0, width - 1)),)))
        elif kind == PHASE or width == 1:
            gates.append(Gate(PHASE, (draw(st.integers(0, width - 1)),),
                              draw(st.floats(-math.pi, math.pi))))
        else:
            q = draw(st.permutations(range(width)))[:2]
            gates.append(Gate(CPHASE, tuple(q), draw(st.floats(-math.pi, math.pi))))
    order = tuple(draw(st.permutations(range(width))))
    return GateList(width, gates, draw(st.floats(-math.pi, math.pi)), order)


@st.composite
def circuits(draw, max_width=4):
    width = draw(st.integers(1, max_width))
    return random_circuit(draw, width, draw(st.integers(0, 12)))


@pytest.mark.parametrize("n", range(1, 13))
def test_floquet_gate_count(n):
    p = derive_params(K=1.0, k=1.0, n=n, boundary="cylinder")
    c = build_floquet_circuit(p)
    assert c.gate_count == 3 * n * n + n
    assert c.counts()[HADAMARD] == 2 * n


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_floquet_equals_spectral_exactly(n):
    p = derive_params(K=math.sqrt(2), k=math.sqrt(3), n=n, boundary="cylinder")
    Uc = circuit_matrix(build_floquet_circuit(p))
    np.testing.assert_allclose(Uc, floquet_matrix(p, ANGLE), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_qft_against_dft(n):
    N = 2**n
    j = np.arange(N)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / N) / math.sqrt(N)
    np.testing.assert_allclose(circuit_matrix(build_qft_circuit(n)), dft, atol=1e-12)
    np.testing.assert_allclose(circuit_matrix(build_qft_circuit(n, inverse=True)),
                               dft.conj().T, atol=1e-12)
    assert build_qft_circuit(n).gate_count == n + n * (n - 1) // 2


@pytest.mark.parametrize("n", [1, 3, 5])
def test_uk_is_kick_diagonal(n):
    k = 1.7
    U = circuit_matrix(build_uk_circuit(n, k))
    np.testing.assert_allclose(U, np.diag(kick_phases(2**n, k)), atol=1e-12)
    assert build_uk_circuit(n, k).gate_count == n * n


@pytest.mark.parametrize("n", [2, 4])
def test_uk_pair_factors_multiply_to_kick(n):
    k = 0.9
    N = 2**n
    diag = np.ones(N, dtype=complex)
    for idx in range(N):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        for j1 in range(1, n + 1):
            for j2 in range(1, n + 1):
                a1, a2 = bits[j1 - 1], bits[j2 - 1]
                if j1 == j2 and a1 != a2:
                    continue
                diag[idx] *= uk_pair_factor(n, k, j1, j2)[2 * a1 + a2, 2 * a1 + a2]
    np.testing.assert_allclose(diag, kick_phases(N, k), atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 4])
def test_ut_centered_and_fft_order(n):
    N, T = 2**n, 0.77
    m = np.arange(N) - N // 2
    np.testing.assert_allclose(circuit_matrix(build_ut_circuit(n, T)),
                               np.diag(np.exp(-0.5j * T * m**2)), atol=1e-12)
    m_fft = np.where(np.arange(N) < N // 2, np.arange(N), np.arange(N) - N)
    np.testing.assert_allclose(circuit_matrix(build_ut_circuit(n, T, centered=False)),
                               np.diag(np.exp(-0.5j * T * m_fft**2)), atol=1e-12)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("X", (0,))
    with pytest.raises(ValueError):
        Gate(CPHASE, (1, 1), 0.3)
    with pytest.raises(ValueError):
        Gate(HADAMARD, (0,), 0.1)
    with pytest.raises(ValueError):
        GateList(2, [Gate(HADAMARD, (2,))])
    with pytest.raises(ValueError):
        GateList(2, [], output_order=(0, 0))


@given(circuits())
def test_adjoint_inverts(c):
    U = circuit_matrix(c)
    np.testing.assert_allclose(circuit_matrix(c.adjoint()), U.conj().T, atol=1e-12)
    np.testing.assert_allclose(circuit_matrix(c.then(c.adjoint())), np.eye(2**c.width),
                               atol=1e-12)


@given(st.data())
def test_composition_is_matrix_product(data):
    width = data.draw(st.integers(1, 4))
    a = random_circuit(data.draw, width, data.draw(st.integers(0, 8)))
    b = random_circuit(data.draw, width, data.draw(st.integers(0, 8)))
    np.testing.assert_allclose(circuit_matrix(a.then(b)), circuit_matrix(b) @ circuit_matrix(a),
                               atol=1e-12)


@given(circuits())
def test_text_round_trip(c):
    back = GateList.from_text(c.to_text())
    np.testing.assert_allclose(circuit_matrix(back), circuit_matrix(c), atol=1e-13)
    assert back.gate_count == c.gate_count


def test_text_format_lines():
    c = GateList(2, [Gate(HADAMARD, (0,)), Gate(PHASE, (1,), 0.5), Gate(CPHASE, (0, 1), -1.0)])
    assert c.to_text().splitlines()[1:] == ["H 0", "P 1 0.5", "CP 0 1 -1"]
    with pytest.raises(ValueError):
        GateList.from_text("H 0\nX 1\n")


def test_width_mismatch():
    c = build_qft_circuit(3)
    with pytest.raises(WidthMismatch):
        apply_gates(np.ones(4), c)
    with pytest.raises(WidthMismatch):
        c.then(build_qft_circuit(2))


def test_repeat():
    p = derive_params(K=1.0, k=2.0, n=3, boundary="cylinder")
    c = build_floquet_circuit(p)
    U = circuit_matrix(c)
    np.testing.assert_allclose(circuit_matrix(c.repeat(3)), U @ U @ U, atol=1e-12)
    assert c.repeat(0).gate_count == 0


def test_max_error_up_to_phase():
    A = np.eye(3) * np.exp(0.4j)
    assert max_error_up_to_phase(A, np.eye(3)) < 1e-15


def test_circuit_evolution_matches_spectral(torus_params):
    psi = init_momentum_state(torus_params)
    a = evolve_with_circuit(psi, 20)
    b = evolve(psi, 20)
    assert abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2 > 1 - 1e-12


def test_gate_verify_report():
    r = gate_verify(3, draws=5)
    assert r["max_error"] < 1e-10
    assert r["gate_count"] == r["expected_gate_count"] == 30
    assert r["hadamards"] + r["phase_gates"] == 30


@given(circuits(max_width=3), st.integers(0, 4))
def test_repeat_matches_chained_then(c, times):
    chained = GateList(c.width)
    for _ in range(times):
        chained = chained.then(c)
    np.testing.assert_allclose(circuit_matrix(c.repeat(times)), circuit_matrix(chained),
                               atol=1e-12)
