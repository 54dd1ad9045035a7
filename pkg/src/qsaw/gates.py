"""Gate-level quantum sawtooth map: circuits of H, P and CP gates.

Qubit 0 is the most significant bit of the register index, so on the angle
register ``theta = 2*pi * sum_q alpha_q 2**-(q+1)``.  Circuits carry two pieces
of bookkeeping besides their gates:

``global_phase``
    a scalar phase.  Irrelevant for a bare circuit, but it turns into a
    relative phase once the circuit is controlled by an ancilla.
``output_order``
    a free relabelling of wires applied after the last gate.  Logical output
    qubit ``q`` sits on physical wire ``output_order[q]``.  The bit reversal of
    the quantum Fourier transform is handled this way instead of with swaps.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from qsaw.errors import WidthMismatch
from qsaw.params import MapParams
from qsaw.propagator import StateVector

HADAMARD = "H"
PHASE = "P"
CPHASE = "CP"
KINDS = (HADAMARD, PHASE, CPHASE)

TWO_PI = 2 * math.pi
_SQRT_HALF = math.sqrt(0.5)


def _reduce(phase: float) -> float:
    """Phase folded into ``(-pi, pi]``."""
    r = math.fmod(phase, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    phase: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == CPHASE else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        if any(q < 0 for q in self.targets):
            raise ValueError(f"negative qubit index in {self.targets}")
        if (self.kind == HADAMARD) != (self.phase is None):
            raise ValueError("Hadamard takes no phase; phase gates need one")

    def adjoint(self) -> Gate:
        if self.kind == HADAMARD:
            return self
        return Gate(self.kind, self.targets, _reduce(-self.phase))

    def remap(self, wires) -> Gate:
        return Gate(self.kind, tuple(wires[q] for q in self.targets), self.phase)


@dataclass
class GateList:
    """Ordered gates on ``width`` qubits plus global phase and output relabelling."""

    width: int
    gates: list[Gate] = field(default_factory=list)
    global_phase: float = 0.0
    output_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be positive")
        self.gates = list(self.gates)
        for g in self.gates:
            if max(g.targets) >= self.width:
                raise ValueError(f"gate {g} exceeds register width {self.width}")
        if self.output_order is not None:
            order = tuple(int(q) for q in self.output_order)
            if sorted(order) != list(range(self.width)):
                raise ValueError(f"output_order {order} is not a permutation")
            self.output_order = None if order == tuple(range(self.width)) else order

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def counts(self) -> Counter:
        return Counter(g.kind for g in self.gates)

    @property
    def order(self) -> tuple[int, ...]:
        return self.output_order or tuple(range(self.width))

    def then(self, other: GateList) -> GateList:
        """Circuit running ``self`` first and ``other`` afterwards."""
        if other.width != self.width:
            raise WidthMismatch(f"cannot compose widths {self.width} and {other.width}")
        wires = self.order
        gates = self.gates + [g.remap(wires) for g in other.gates]
        order = tuple(wires[q] for q in other.order)
        return GateList(self.width, gates, self.global_phase + other.global_phase, order)

    def adjoint(self) -> GateList:
        """Inverse circuit: reversed order, conjugated phases."""
        inv = [0] * self.width
        for q, w in enumerate(self.order):
            inv[w] = q
        gates = [g.adjoint().remap(inv) for g in reversed(self.gates)]
        return GateList(self.width, gates, -self.global_phase, tuple(inv))

    def repeat(self, times: int) -> GateList:
        """``self`` run ``times`` times; same result as chaining :meth:`then`."""
        if times < 0:
            raise ValueError("times must be >= 0")
        identity = tuple(range(self.width))
        wires = identity
        gates: list[Gate] = []
        for _ in range(times):
            gates.extend(self.gates if wires == identity else (g.remap(wires) for g in self.gates))
            wires = tuple(wires[q] for q in self.order)
        return GateList(self.width, gates, times * self.global_phase, wires)

    # text form: one gate per line, "H q" | "P q phase" | "CP q1 q2 phase"
    def to_text(self) -> str:
        lines = [f"WIDTH {self.width}"]
        if self.global_phase:
            lines.append(f"GPHASE {self.global_phase:.17g}")
        if self.output_order is not None:
            lines.append("ORDER " + " ".join(map(str, self.output_order)))
        for g in self.gates:
            if g.kind == HADAMARD:
                lines.append(f"H {g.targets[0]}")
            elif g.kind == PHASE:
                lines.append(f"P {g.targets[0]} {g.phase:.17g}")
            else:
                lines.append(f"CP {g.targets[0]} {g.targets[1]} {g.phase:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> GateList:
        width = None
        phase = 0.0
        order = None
        gates = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            head = tok[0].upper()
            try:
                if head == "WIDTH":
                    width = int(tok[1])
                elif head == "GPHASE":
                    phase = float(tok[1])
                elif head == "ORDER":
                    order = tuple(int(x) for x in tok[1:])
                elif head == HADAMARD and len(tok) == 2:
                    gates.append(Gate(HADAMARD, (int(tok[1]),)))
                elif head == PHASE and len(tok) == 3:
                    gates.append(Gate(PHASE, (int(tok[1]),), float(tok[2])))
                elif head == CPHASE and len(tok) == 4:
                    gates.append(Gate(CPHASE, (int(tok[1]), int(tok[2])), float(tok[3])))
                else:
                    raise ValueError("unrecognised line")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: {raw!r}: {exc}") from None
        if width is None:
            width = 1 + max((max(g.targets) for g in gates), default=0)
        return cls(width, gates, phase, order)


# circuit builders --------------------------------------------------------


def _quadratic_circuit(n: int, coeff: float, signs: Iterable[int] | None = None,
                       linear: float = 0.0, const: float = 0.0) -> GateList:
    """Diagonal circuit ``exp(i * f(x))`` for a quadratic form on register bits.

    With ``x = sum_q s_q b_q 2**-(q+1)`` (``s_q`` the optional signs) the phase
    is ``f = coeff * (x**2 + linear * x + const)``.  One gate per ordered qubit
    pair: the ``n*(n-1)`` cross terms become CP gates, every diagonal term
    together with the linear part becomes a single P gate, and the constant
    goes into the global phase.
    """
    s = list(signs) if signs is not None else [1] * n
    gates = []
    for q1 in range(n):
        for q2 in range(n):
            if q1 == q2:
                w = 2.0 ** -(q1 + 1)
                gates.append(Gate(PHASE, (q1,), _reduce(coeff * (w * w + linear * s[q1] * w))))
            else:
                w = s[q1] * s[q2] * 2.0 ** -(q1 + q2 + 2)
                gates.append(Gate(CPHASE, (q1, q2), _reduce(coeff * w)))
    return GateList(n, gates, _reduce(coeff * const))


def build_uk_circuit(n: int, k: float) -> GateList:
    """Kick ``exp(i k (theta - pi)**2 / 2)`` on the angle register, ``n**2`` gates.

    ``(theta - pi)**2 / 2 = 2 pi**2 (x**2 - x + 1/4)`` with ``x = theta/(2 pi)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return _quadratic_circuit(n, 2 * math.pi**2 * k, linear=-1.0, const=0.25)


def uk_pair_factor(n: int, k: float, j1: int, j2: int) -> np.ndarray:
    """Literal two-qubit factor ``exp(i 2 pi**2 k D_{j1,j2})`` (1-based qubit labels).

    Returned as the 4x4 diagonal on ``|a_j1 a_j2>``; for ``j1 == j2`` only the
    ``|00>`` and ``|11>`` entries are meaningful.  The product of all ``n**2``
    factors equals the kick operator exactly; :func:`build_uk_circuit`
    regroups the same phases into P/CP gates.
    """
    c1 = 2.0 ** -j1 - 1 / (2 * n)
    c2 = 2.0 ** -j2 - 1 / (2 * n)
    off = -1 / (2 * n)
    d = np.array([off * off, off * c2, c1 * off, c1 * c2])
    return np.diag(np.exp(2j * math.pi**2 * k * d))


def build_ut_circuit(n: int, T: float, centered: bool = True) -> GateList:
    """Free rotation ``exp(-i T m**2 / 2)`` on the momentum register, ``n**2`` gates.

    ``centered=True`` reads the register index ``j`` as ``m = j - N/2``.  With
    ``centered=False`` it uses FFT ordering (``m = j`` for ``j < N/2``, else
    ``j - N``), i.e. a two's-complement reading of the bits; this is the same
    operator conjugated by a flip of the top bit, and is the form used inside
    the Floquet circuit where it makes any centring gates unnecessary.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    N = 2**n
    coeff = -0.5 * T * N * N
    if centered:
        return _quadratic_circuit(n, coeff, linear=-1.0, const=0.25)
    return _quadratic_circuit(n, coeff, signs=[-1] + [1] * (n - 1))


def build_qft_circuit(n: int, inverse: bool = False, centered: bool = False) -> GateList:
    """Angle-to-momentum Fourier transform: ``n`` H and ``n(n-1)/2`` CP gates.

    Forward maps ``psi(theta_l)`` to ``N**-0.5 sum_l exp(-2 pi i j l / N) psi_l``.
    The output bit reversal is a relabelling (``output_order``), not swaps.
    ``centered=True`` adds one P(pi) gate on the least significant angle qubit,
    the ``(-1)**l`` twist that puts ``m = 0`` at index ``N/2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gates = [Gate(PHASE, (n - 1,), math.pi)] if centered else []
    for q in range(n):
        gates.append(Gate(HADAMARD, (q,)))
        for r in range(q + 1, n):
            gates.append(Gate(CPHASE, (r, q), -TWO_PI / 2 ** (r - q + 1)))
    qft = GateList(n, gates, 0.0, tuple(range(n - 1, -1, -1)))
    return qft.adjoint() if inverse else qft


def build_floquet_circuit(params: MapParams) -> GateList:
    """One map iteration on the angle register: ``U_k``, QFT, ``U_T``, inverse QFT.

    ``3n**2 + n`` gates: ``3n**2 - n`` phase-type gates and ``2n`` Hadamards.
    Acts on angle-basis amplitudes; it equals the spectral Floquet operator
    written in the angle basis, global phase included.
    """
    n = params.n
    qft = build_qft_circuit(n)
    return (build_uk_circuit(n, params.k)
            .then(qft)
            .then(build_ut_circuit(n, params.T, centered=False))
            .then(qft.adjoint()))


# execution -------------------------------------------------------------------


def _index(width: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * width
    for q, v in fixed.items():
        idx[q] = v
    return tuple(idx)


def apply_inplace(tensor: np.ndarray, circuit: GateList) -> None:
    """Run ``circuit`` on a ``(2,)*width`` tensor (may be a view) in place."""
    w = circuit.width
    if tensor.ndim != w:
        raise WidthMismatch(f"state has {tensor.ndim} qubits, circuit has width {w}")
    for g in circuit.gates:
        if g.kind == HADAMARD:
            q = g.targets[0]
            i0, i1 = _index(w, {q: 0}), _index(w, {q: 1})
            a = tensor[i0].copy()
            b = tensor[i1]
            tensor[i0] = (a + b) * _SQRT_HALF
            tensor[i1] = (a - b) * _SQRT_HALF
        elif g.kind == PHASE:
            tensor[_index(w, {g.targets[0]: 1})] *= np.exp(1j * g.phase)
        else:
            q1, q2 = g.targets
            tensor[_index(w, {q1: 1, q2: 1})] *= np.exp(1j * g.phase)
    if circuit.global_phase:
        tensor *= np.exp(1j * circuit.global_phase)
    if circuit.output_order is not None:
        tensor[...] = np.transpose(tensor, circuit.output_order).copy()


def apply_gates(psi, circuit: GateList):
    """Apply ``circuit`` to a state; returns a new object of the same kind.

    ``psi`` may be a :class:`StateVector` (basis tag is kept) or a flat array
    of ``2**width`` amplitudes.
    """
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    if amps.shape != (2**circuit.width,):
        raise WidthMismatch(
            f"state of {amps.size} amplitudes vs circuit width {circuit.width}")
    tensor = amps.reshape((2,) * circuit.width).copy()
    apply_inplace(tensor, circuit)
    out = tensor.reshape(-1)
    if isinstance(psi, StateVector):
        return StateVector(out, psi.basis, psi.params)
    return out


def circuit_matrix(circuit: GateList) -> np.ndarray:
    """Dense unitary of ``circuit``, built column by column."""
    N = 2**circuit.width
    U = np.empty((N, N), dtype=complex)
    for col in range(N):
        e = np.zeros(N, dtype=complex)
        e[col] = 1.0
        U[:, col] = apply_gates(e, circuit)
    return U


def max_error_up_to_phase(A: np.ndarray, B: np.ndarray) -> float:
    """Max elementwise ``|A - e^{i phi} B|`` with ``phi`` aligning the traces."""
    overlap = np.vdot(B, A)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(A - phase * B)))


def evolve_with_circuit(psi: StateVector, steps: int, circuit: GateList | None = None) -> StateVector:
    """Gate-level counterpart of repeated ``floquet_step`` on a momentum state.

    The basis changes in and out of the angle register use the centred gate
    QFT, so no FFT is involved on this path.
    """
    from qsaw.propagator import ANGLE, MOMENTUM

    n = psi.params.n
    circuit = circuit or build_floquet_circuit(psi.params)
    amps = apply_gates(psi.amplitudes, build_qft_circuit(n, inverse=True, centered=True))
    tensor = amps.reshape((2,) * n)
    for _ in range(steps):
        apply_inplace(tensor, circuit)
    state = StateVector(tensor.reshape(-1), ANGLE, psi.params)
    back = apply_gates(state.amplitudes, build_qft_circuit(n, centered=True))
    return StateVector(back, MOMENTUM, psi.params)


def gate_verify(n: int, draws: int = 20, seed: int = 0) -> dict:
    """Dense comparison of gate-built and spectral Floquet operators for random ``(k, T)``."""
    from qsaw.propagator import ANGLE, floquet_matrix

    gen = np.random.default_rng(seed)
    worst = 0.0
    worst_up_to_phase = 0.0
    for _ in range(draws):
        k = gen.uniform(-5, 5)
        T = gen.uniform(0.05, 5)
        params = MapParams(K=k * T, k=k, T=T, n=n, L=None, boundary="cylinder")
        Uc = circuit_matrix(build_floquet_circuit(params))
        Us = floquet_matrix(params, basis=ANGLE)
        worst = max(worst, float(np.max(np.abs(Uc - Us))))
        worst_up_to_phase = max(worst_up_to_phase, max_error_up_to_phase(Uc, Us))
    circuit = build_floquet_circuit(MapParams(K=1.0, k=1.0, T=1.0, n=n, boundary="cylinder"))
    return {
        "n": n,
        "draws": draws,
        "max_error": worst,
        "max_error_up_to_global_phase": worst_up_to_phase,
        "gate_count": circuit.gate_count,
        "expected_gate_count": 3 * n * n + n,
        "hadamards": circuit.counts()[HADAMARD],
        "phase_gates": circuit.counts()[PHASE] + circuit.counts()[CPHASE],
    }
