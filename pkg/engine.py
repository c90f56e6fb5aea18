"""
Dense state-vector engine

Amplitudes live in one complex128 array of length 2^N; bit b of an index is
the state of qubit b. Gate kernels work in place on a [2]*N tensor view, where
qubit q is axis N-1-q. Qubit state |0> has sigma^z eigenvalue +1.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from circuit import Circuit, GateKind, PauliTerm
from errors import InputError
from lattice import Hamiltonian, validate_bitstring

logger = logging.getLogger(__name__)

MAX_QUBITS = 26
HERMITICITY_TOL = 1e-10

_C = math.cos(math.pi / 4)
_S = math.sin(math.pi / 4)
# Rx(+-pi/2), Ry(+-pi/2) as (m00, m01, m10, m11)
_HALF_TURNS = {
    GateKind.RX_PLUS: (_C, -1j * _S, -1j * _S, _C),
    GateKind.RX_MINUS: (_C, 1j * _S, 1j * _S, _C),
    GateKind.RY_PLUS: (_C, -_S, _S, _C),
    GateKind.RY_MINUS: (_C, _S, -_S, _C),
}


class StateVector:
    """Unit-norm state of an N-qubit register"""

    def __init__(self, nqubits: int, amplitudes: Optional[np.ndarray] = None):
        if not 1 <= nqubits <= MAX_QUBITS:
            raise InputError(f"engine supports 1..{MAX_QUBITS} qubits, got {nqubits}")
        self.nqubits = nqubits
        if amplitudes is None:
            amplitudes = np.zeros(2 ** nqubits, dtype=np.complex128)
            amplitudes[0] = 1.0
        amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2 ** nqubits,):
            raise InputError(f"expected {2 ** nqubits} amplitudes, got shape {amplitudes.shape}")
        self.amplitudes = amplitudes

    def copy(self) -> "StateVector":
        return StateVector(self.nqubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        probs = np.abs(self.amplitudes) ** 2
        return probs / probs.sum()

    def dump(self, path: str) -> None:
        """Binary dump: little-endian float64 (re, im) pairs in index order."""
        self.amplitudes.astype("<c16").tofile(path)
        logger.debug(f"💾 Dumped {self.nqubits}-qubit state to {path}")


# ============================================================================
# Kernels
# ============================================================================

def _halves(n: int, qubit: int) -> Tuple[tuple, tuple]:
    low = [slice(None)] * n
    high = [slice(None)] * n
    low[n - 1 - qubit] = 0
    high[n - 1 - qubit] = 1
    return tuple(low), tuple(high)


def _controlled_halves(n: int, control: int, target: int) -> Tuple[tuple, tuple]:
    low = [slice(None)] * n
    low[n - 1 - control] = 1
    high = list(low)
    low[n - 1 - target] = 0
    high[n - 1 - target] = 1
    return tuple(low), tuple(high)


def _swap_halves(tensor: np.ndarray, low: tuple, high: tuple) -> None:
    saved = tensor[low].copy()
    tensor[low] = tensor[high]
    tensor[high] = saved


def _apply_matrix(tensor: np.ndarray, n: int, qubit: int, m: Tuple[complex, complex, complex, complex]) -> None:
    low, high = _halves(n, qubit)
    a0 = tensor[low].copy()
    a1 = tensor[high]
    tensor[low] = m[0] * a0 + m[1] * a1
    tensor[high] = m[2] * a0 + m[3] * tensor[high]


def _apply_rz(tensor: np.ndarray, n: int, qubit: int, angle: float) -> None:
    low, high = _halves(n, qubit)
    tensor[low] *= np.exp(-0.5j * angle)
    tensor[high] *= np.exp(0.5j * angle)


def _apply_pauli(tensor: np.ndarray, n: int, qubit: int, axis: str) -> None:
    low, high = _halves(n, qubit)
    if axis == "x":
        _swap_halves(tensor, low, high)
    elif axis == "y":
        a0 = tensor[low].copy()
        tensor[low] = -1j * tensor[high]
        tensor[high] = 1j * a0
    else:
        tensor[high] *= -1


def apply_pauli_term(amplitudes: np.ndarray, nqubits: int, term: PauliTerm) -> None:
    """Multiply the Pauli product (coefficient excluded) into amplitudes in place."""
    tensor = amplitudes.reshape([2] * nqubits)
    for site, axis in zip(term.sites, term.axes):
        _apply_pauli(tensor, nqubits, site, axis)


def _apply_gates(amplitudes: np.ndarray, nqubits: int, circuit: Circuit, values: Dict[str, float]) -> None:
    tensor = amplitudes.reshape([2] * nqubits)
    for gate in circuit.gates:
        kind = gate.kind
        if kind is GateKind.RZ:
            _apply_rz(tensor, nqubits, gate.qubits[0], gate.rz_angle(values))
        elif kind is GateKind.CNOT:
            low, high = _controlled_halves(nqubits, *gate.qubits)
            _swap_halves(tensor, low, high)
        elif kind is GateKind.X:
            _swap_halves(tensor, *_halves(nqubits, gate.qubits[0]))
        else:
            _apply_matrix(tensor, nqubits, gate.qubits[0], _HALF_TURNS[kind])


# ============================================================================
# Operations
# ============================================================================

def prepare_basis_state(nqubits: int, bitstring: str) -> StateVector:
    """One-hot state; character i of the bitstring is qubit i."""
    validate_bitstring(bitstring, nqubits)
    index = sum(1 << q for q, bit in enumerate(bitstring) if bit == "1")
    amplitudes = np.zeros(2 ** nqubits, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(nqubits, amplitudes)


def apply_circuit(
    state: StateVector,
    circuit: Circuit,
    parameters: Optional[Sequence[float]] = None,
    inplace: bool = False,
) -> StateVector:
    """
    Run the circuit gate by gate on the state.

    Args:
        state: Input state
        circuit: Circuit over the same register
        parameters: One value per circuit parameter slot
        inplace: Mutate state.amplitudes instead of working on a copy

    Returns:
        The transformed state
    """
    if circuit.nqubits != state.nqubits:
        raise InputError(f"circuit has {circuit.nqubits} qubits, state has {state.nqubits}")
    values = circuit.bind(parameters)
    target = state if inplace else state.copy()
    _apply_gates(target.amplitudes, target.nqubits, circuit, values)
    return target


def _check_dims(state: StateVector, hamiltonian: Hamiltonian) -> None:
    if state.nqubits != hamiltonian.nqubits:
        raise InputError(f"state has {state.nqubits} qubits, Hamiltonian has {hamiltonian.nqubits}")


def expectation(state: StateVector, hamiltonian: Hamiltonian, scratch: Optional[np.ndarray] = None) -> float:
    """
    <psi|H|psi> term by term through a reusable scratch buffer.

    The imaginary part is checked against HERMITICITY_TOL and dropped.
    """
    _check_dims(state, hamiltonian)
    psi = state.amplitudes
    if scratch is None:
        scratch = np.empty_like(psi)
    total = 0j
    for term in hamiltonian.terms:
        np.copyto(scratch, psi)
        apply_pauli_term(scratch, state.nqubits, term)
        total += term.coefficient * np.vdot(psi, scratch)
    if abs(total.imag) > HERMITICITY_TOL * max(1.0, abs(total.real)):
        raise ArithmeticError(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


def hamiltonian_matvec(
    hamiltonian: Hamiltonian,
    vector: np.ndarray,
    out: Optional[np.ndarray] = None,
    scratch: Optional[np.ndarray] = None,
) -> np.ndarray:
    """H @ vector without forming H."""
    n = hamiltonian.nqubits
    if vector.shape != (2 ** n,):
        raise InputError(f"vector has shape {vector.shape}, expected ({2 ** n},)")
    if out is None:
        out = np.zeros_like(vector)
    else:
        out.fill(0)
    if scratch is None:
        scratch = np.empty_like(vector)
    for term in hamiltonian.terms:
        np.copyto(scratch, vector)
        apply_pauli_term(scratch, n, term)
        out += term.coefficient * scratch
    return out


@lru_cache(maxsize=8)
def _popcounts(nqubits: int) -> np.ndarray:
    index = np.arange(2 ** nqubits, dtype=np.int64)
    counts = np.zeros_like(index)
    for q in range(nqubits):
        counts += (index >> q) & 1
    return counts


def magnetization_z(state: StateVector) -> float:
    """<sum_i sigma_i^z> = N - 2 <number of 1 bits>."""
    probs = np.abs(state.amplitudes) ** 2
    return float(state.nqubits - 2.0 * np.dot(probs, _popcounts(state.nqubits)))


def total_spin_squared(state: StateVector) -> float:
    """<S^2> with S = sum_i sigma_i / 2; 0 for a singlet."""
    n = state.nqubits
    psi = state.amplitudes
    scratch = np.empty_like(psi)
    pair_sum = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for axis in "xyz":
                np.copyto(scratch, psi)
                apply_pauli_term(scratch, n, PauliTerm((i, j), axis * 2))
                pair_sum += float(np.vdot(psi, scratch).real)
    return 0.75 * n + 0.5 * pair_sum


def overlap_sq(a: StateVector, b: StateVector) -> float:
    if a.nqubits != b.nqubits:
        raise InputError(f"overlap of {a.nqubits}- and {b.nqubits}-qubit states")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


# ============================================================================
# Sampling
# ============================================================================

# rotation that maps the measured axis onto z before a computational readout
_MEASUREMENT_ROTATION = {"x": GateKind.RY_MINUS, "y": GateKind.RX_PLUS}


def _rotated_probabilities(state: StateVector, axis: str) -> np.ndarray:
    if axis == "z":
        return state.probabilities()
    rotated = state.copy()
    tensor = rotated.amplitudes.reshape([2] * state.nqubits)
    for q in range(state.nqubits):
        _apply_matrix(tensor, state.nqubits, q, _HALF_TURNS[_MEASUREMENT_ROTATION[axis]])
    return rotated.probabilities()


def estimate_energy_sampled(
    state: StateVector,
    hamiltonian: Hamiltonian,
    shots: int,
    seed,
) -> Tuple[float, float]:
    """
    Shot-based energy with three global measurement settings (all-X, all-Y, all-Z).

    Shots are split evenly across the settings that have terms, remainder to Z.
    Each shot's energy contribution is summed within a setting, so the standard
    error includes the covariance between terms measured together.

    Args:
        state: State to measure (not modified)
        hamiltonian: Axis-uniform Hamiltonian
        shots: Total number of shots
        seed: Integer seed or numpy SeedSequence for the Philox generator

    Returns:
        (estimate, standard_error)
    """
    _check_dims(state, hamiltonian)
    if shots < 1:
        raise InputError(f"shots must be >= 1, got {shots}")
    groups: Dict[str, list] = {}
    for term in hamiltonian.terms:
        if not term.is_axis_uniform():
            raise InputError(f"term {term.label()} is not axis-uniform; cannot group by basis")
        axis = term.axes[0] if term.axes else "z"
        groups.setdefault(axis, []).append(term)
    settings = [a for a in "xyz" if a in groups]
    if not settings:
        return 0.0, 0.0
    if shots < len(settings):
        raise InputError(f"{shots} shot(s) cannot cover {len(settings)} measurement settings")
    per_setting = {a: shots // len(settings) for a in settings}
    per_setting[settings[-1]] += shots - sum(per_setting.values())

    rng = np.random.Generator(np.random.Philox(seed))
    estimate = 0.0
    variance = 0.0
    for axis in settings:
        count = per_setting[axis]
        probs = _rotated_probabilities(state, axis)
        outcomes = rng.choice(probs.size, size=count, p=probs)
        shot_energy = np.zeros(count)
        for term in groups[axis]:
            parity = np.zeros(count, dtype=np.int64)
            for site in term.sites:
                parity ^= (outcomes >> site) & 1
            shot_energy += term.coefficient * (1 - 2 * parity)
        estimate += float(shot_energy.mean())
        if count > 1:
            variance += float(shot_energy.var(ddof=1)) / count
    return estimate, math.sqrt(variance)
