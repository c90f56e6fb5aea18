"""
Gate-level circuit IR

Holds the Pauli-term atom shared with the Hamiltonian builder, the small gate
set used by the ansatz circuits, the Pauli-exponential compiler, the
cancellation/merge optimizer, the depth metric and a dense-unitary oracle.

Rotation convention: Ra(phi) = exp(-i * phi * sigma^a / 2). Qubit 0 is the
least significant bit of a basis-state index.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from errors import InputError

logger = logging.getLogger(__name__)

AXES = "xyz"
MAX_ORACLE_QUBITS = 10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
_PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)


@dataclass(frozen=True)
class PauliTerm:
    """Real coefficient times a tensor product of single-qubit Paulis"""

    sites: Tuple[int, ...]
    axes: str
    coefficient: float = 1.0

    def __post_init__(self):
        if len(self.sites) != len(self.axes):
            raise InputError(f"PauliTerm has {len(self.sites)} sites but axes '{self.axes}'")
        if any(a not in AXES for a in self.axes):
            raise InputError(f"PauliTerm axes must be drawn from 'xyz', got '{self.axes}'")
        if any(s < 0 for s in self.sites):
            raise InputError(f"negative site index in {self.sites}")
        if any(b <= a for a, b in zip(self.sites, self.sites[1:])):
            raise InputError(f"PauliTerm sites must be strictly increasing, got {self.sites}")

    @classmethod
    def from_factors(cls, factors: Mapping[int, str], coefficient: float = 1.0) -> "PauliTerm":
        """Build a term from a {site: axis} mapping in any order."""
        ordered = sorted(factors.items())
        return cls(tuple(s for s, _ in ordered), "".join(a for _, a in ordered), float(coefficient))

    def factors(self) -> Dict[int, str]:
        return dict(zip(self.sites, self.axes))

    def is_axis_uniform(self) -> bool:
        return len(set(self.axes)) <= 1

    def to_sparse(self, nqubits: int, with_coefficient: bool = True) -> sparse.csr_matrix:
        if self.sites and self.sites[-1] >= nqubits:
            raise InputError(f"term touches qubit {self.sites[-1]} but register has {nqubits}")
        matrix = embed_operator({s: _PAULI[a] for s, a in self.factors().items()}, nqubits)
        return matrix * self.coefficient if with_coefficient else matrix

    def label(self) -> str:
        return " ".join(f"{a.upper()}{s}" for s, a in zip(self.sites, self.axes))


class GateKind(str, Enum):
    X = "X"
    RX_PLUS = "RX+"
    RX_MINUS = "RX-"
    RY_PLUS = "RY+"
    RY_MINUS = "RY-"
    RZ = "RZ"
    CNOT = "CNOT"


_INVERSE_KIND = {
    GateKind.X: GateKind.X,
    GateKind.RX_PLUS: GateKind.RX_MINUS,
    GateKind.RX_MINUS: GateKind.RX_PLUS,
    GateKind.RY_PLUS: GateKind.RY_MINUS,
    GateKind.RY_MINUS: GateKind.RY_PLUS,
    GateKind.CNOT: GateKind.CNOT,
    GateKind.RZ: GateKind.RZ,
}

# basis change that maps the axis onto z, and its inverse
_BASIS_BEFORE = {"x": GateKind.RY_MINUS, "y": GateKind.RX_PLUS}
_BASIS_AFTER = {"x": GateKind.RY_PLUS, "y": GateKind.RX_MINUS}


@dataclass(frozen=True)
class Gate:
    """
    One gate. RZ carries either a literal angle (slot is None) or a reference
    to a parameter slot; its angle is then multiplier * value(slot).
    """

    kind: GateKind
    qubits: Tuple[int, ...]
    angle: float = 0.0
    slot: Optional[str] = None
    multiplier: float = 2.0

    def __post_init__(self):
        expected = 2 if self.kind is GateKind.CNOT else 1
        if len(self.qubits) != expected:
            raise InputError(f"{self.kind.value} acts on {expected} qubit(s), got {self.qubits}")
        if self.kind is GateKind.CNOT and self.qubits[0] == self.qubits[1]:
            raise InputError(f"CNOT control and target must differ, got {self.qubits}")
        if self.slot is not None and self.kind is not GateKind.RZ:
            raise InputError(f"only RZ gates take parameter slots, got {self.kind.value}")

    @property
    def is_symbolic(self) -> bool:
        return self.slot is not None

    def rz_angle(self, values: Optional[Mapping[str, float]] = None) -> float:
        """Resolve the RZ angle against bound slot values."""
        if self.slot is None:
            return self.angle
        if values is None or self.slot not in values:
            raise InputError(f"parameter slot '{self.slot}' is not bound")
        return self.multiplier * values[self.slot]

    def inverse(self) -> "Gate":
        if self.kind is GateKind.RZ:
            if self.slot is None:
                return replace(self, angle=-self.angle)
            return replace(self, multiplier=-self.multiplier)
        return replace(self, kind=_INVERSE_KIND[self.kind])

    def to_text(self) -> str:
        qubits = " ".join(str(q) for q in self.qubits)
        if self.kind is not GateKind.RZ:
            return f"{self.kind.value} {qubits}"
        if self.slot is None:
            return f"RZ {qubits} {self.angle!r}"
        return f"RZ {qubits} {self.multiplier:g}*{self.slot}"


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a fixed register with named parameter slots"""

    nqubits: int
    gates: Tuple[Gate, ...] = ()
    parameter_slots: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.nqubits < 1:
            raise InputError(f"circuit needs at least one qubit, got {self.nqubits}")
        if len(set(self.parameter_slots)) != len(self.parameter_slots):
            raise InputError("duplicate parameter slot names")
        known = set(self.parameter_slots)
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.nqubits:
                    raise InputError(f"qubit {q} out of range for {self.nqubits}-qubit circuit")
            if gate.slot is not None and gate.slot not in known:
                raise InputError(f"gate references unknown slot '{gate.slot}'")

    @property
    def parameter_count(self) -> int:
        return len(self.parameter_slots)

    def bind(self, parameters: Optional[Sequence[float]]) -> Dict[str, float]:
        """Map a parameter vector onto slot names (vector order = slot order)."""
        if parameters is None:
            parameters = ()
        if len(parameters) != self.parameter_count:
            raise InputError(
                f"circuit has {self.parameter_count} parameter slots, got {len(parameters)} values"
            )
        return {name: float(v) for name, v in zip(self.parameter_slots, parameters)}

    def inverse(self) -> "Circuit":
        return Circuit(self.nqubits, tuple(g.inverse() for g in reversed(self.gates)), self.parameter_slots)

    def counts(self) -> Dict[str, int]:
        result: Dict[str, int] = {}
        for gate in self.gates:
            result[gate.kind.value] = result.get(gate.kind.value, 0) + 1
        return result

    def to_text(self) -> str:
        lines = [f"QUBITS {self.nqubits}", " ".join(["SLOTS", *self.parameter_slots])]
        lines.extend(g.to_text() for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        nqubits = None
        slots: Tuple[str, ...] = ()
        gates: List[Gate] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split()
            if not parts:
                continue
            head = parts[0]
            try:
                if head == "QUBITS":
                    nqubits = int(parts[1])
                elif head == "SLOTS":
                    slots = tuple(parts[1:])
                elif head == "RZ":
                    qubit, angle = int(parts[1]), parts[2]
                    if "*" in angle:
                        mult, slot = angle.split("*", 1)
                        gates.append(Gate(GateKind.RZ, (qubit,), slot=slot, multiplier=float(mult)))
                    else:
                        gates.append(Gate(GateKind.RZ, (qubit,), angle=float(angle)))
                else:
                    gates.append(Gate(GateKind(head), tuple(int(p) for p in parts[1:])))
            except (IndexError, ValueError) as e:
                raise InputError(f"circuit text line {lineno}: cannot parse '{raw.strip()}' ({e})") from e
        if nqubits is None:
            raise InputError("circuit text is missing the QUBITS header")
        return cls(nqubits, tuple(gates), slots)


# ============================================================================
# Compilation
# ============================================================================

def compile_pauli_rotation(
    term: PauliTerm,
    slot: Optional[str] = None,
    nqubits: Optional[int] = None,
    theta: float = 0.0,
    multiplier: float = 2.0,
) -> Circuit:
    """
    Compile exp(-i * theta * P) for the term's Pauli product P.

    Basis changes bring every factor to z, a CNOT ladder collects the parity on
    the highest site, RZ(2 theta) acts there, then everything is undone.

    Args:
        term: Pauli product; its coefficient is ignored
        slot: Parameter slot name; None compiles the literal angle theta
        nqubits: Register size (defaults to highest site + 1)
        theta: Literal angle used when slot is None
        multiplier: Slot multiplier, 2 for Pauli rotations

    Returns:
        Circuit fragment with at most one parameter slot
    """
    if not term.sites:
        raise InputError("cannot compile an empty Pauli term")
    if nqubits is None:
        nqubits = term.sites[-1] + 1
    factors = term.factors()
    target = term.sites[-1]
    controls = term.sites[:-1]

    gates: List[Gate] = []
    for site, axis in factors.items():
        if axis in _BASIS_BEFORE:
            gates.append(Gate(_BASIS_BEFORE[axis], (site,)))
    ladder = [Gate(GateKind.CNOT, (c, target)) for c in controls]
    gates.extend(ladder)
    if slot is None:
        gates.append(Gate(GateKind.RZ, (target,), angle=multiplier * theta))
    else:
        gates.append(Gate(GateKind.RZ, (target,), slot=slot, multiplier=multiplier))
    gates.extend(reversed(ladder))
    for site, axis in factors.items():
        if axis in _BASIS_AFTER:
            gates.append(Gate(_BASIS_AFTER[axis], (site,)))

    slots = (slot,) if slot is not None else ()
    return Circuit(nqubits, tuple(gates), slots)


def compile_generators(
    nqubits: int,
    generators: Iterable[Tuple[PauliTerm, str]],
    initial_bits: Optional[str] = None,
) -> Circuit:
    """
    Chain Pauli-rotation fragments in application order.

    Args:
        nqubits: Register size
        generators: (term, slot) pairs, first applied first
        initial_bits: Optional basis bitstring; an X gate is emitted on every
            site whose bit is '1' before the first fragment

    Returns:
        Circuit whose slot order is the generator order
    """
    gates: List[Gate] = []
    if initial_bits is not None:
        if len(initial_bits) != nqubits:
            raise InputError(f"initial bitstring has length {len(initial_bits)}, register has {nqubits}")
        gates.extend(Gate(GateKind.X, (q,)) for q, bit in enumerate(initial_bits) if bit == "1")
    slots: List[str] = []
    for term, slot in generators:
        fragment = compile_pauli_rotation(term, slot, nqubits=nqubits)
        gates.extend(fragment.gates)
        slots.append(slot)
    return Circuit(nqubits, tuple(gates), tuple(slots))


# ============================================================================
# Optimization
# ============================================================================

_REPRESENTATIVE_ANGLE = 0.731
_commutation_cache: Dict[tuple, bool] = {}


def _is_zero_rz(gate: Gate) -> bool:
    if gate.kind is not GateKind.RZ or gate.slot is not None:
        return False
    # RZ(2*pi*k) is a global phase
    remainder = math.remainder(gate.angle, 2 * math.pi)
    return abs(remainder) < 1e-12


def _commutes(a: Gate, b: Gate) -> bool:
    shared = set(a.qubits) & set(b.qubits)
    if not shared:
        return True
    support = sorted(set(a.qubits) | set(b.qubits))
    local = {q: i for i, q in enumerate(support)}
    key = (a.kind, tuple(local[q] for q in a.qubits), b.kind, tuple(local[q] for q in b.qubits))
    cached = _commutation_cache.get(key)
    if cached is not None:
        return cached
    n = len(support)
    ma = _gate_sparse(Gate(a.kind, key[1]), n, _REPRESENTATIVE_ANGLE).toarray()
    mb = _gate_sparse(Gate(b.kind, key[3]), n, _REPRESENTATIVE_ANGLE).toarray()
    result = bool(np.allclose(ma @ mb, mb @ ma, atol=1e-12))
    _commutation_cache[key] = result
    return result


def _is_partner(a: Gate, b: Gate) -> bool:
    if a.qubits != b.qubits:
        return False
    if a.kind is GateKind.RZ:
        return b.kind is GateKind.RZ and a.slot is None and b.slot is None
    return b.kind is _INVERSE_KIND[a.kind]


def _find_partner(gates, alive, wires, wire_pos, i, max_window) -> Optional[int]:
    gate = gates[i]
    q0 = gate.qubits[0]
    wire = wires[q0]
    steps = 0
    for w in range(wire_pos[i][q0] + 1, len(wire)):
        j = wire[w]
        if not alive[j]:
            continue
        steps += 1
        if steps > max_window:
            return None
        candidate = gates[j]
        if _is_partner(gate, candidate) and _path_commutes(gates, alive, wires, wire_pos, i, j):
            return j
        if not _commutes(gate, candidate):
            return None
    return None


def _path_commutes(gates, alive, wires, wire_pos, i, j) -> bool:
    gate = gates[i]
    for q in gate.qubits[1:]:
        wire = wires[q]
        for w in range(wire_pos[i][q] + 1, len(wire)):
            k = wire[w]
            if k >= j:
                break
            if alive[k] and not _commutes(gate, gates[k]):
                return False
    return True


def _cancellation_pass(gates: List[Gate], max_window: int) -> Tuple[List[Gate], bool]:
    gates = list(gates)
    alive = [True] * len(gates)
    wires: Dict[int, List[int]] = {}
    wire_pos: List[Dict[int, int]] = []
    for i, gate in enumerate(gates):
        positions = {}
        for q in gate.qubits:
            wire = wires.setdefault(q, [])
            positions[q] = len(wire)
            wire.append(i)
        wire_pos.append(positions)

    changed = False
    for i, gate in enumerate(gates):
        if not alive[i] or gate.is_symbolic:
            continue
        j = _find_partner(gates, alive, wires, wire_pos, i, max_window)
        if j is None:
            continue
        alive[i] = False
        if gate.kind is GateKind.RZ:
            merged = replace(gates[j], angle=gate.angle + gates[j].angle)
            if _is_zero_rz(merged):
                alive[j] = False
            else:
                gates[j] = merged
        else:
            alive[j] = False
        changed = True
    return [g for g, keep in zip(gates, alive) if keep], changed


def optimize_circuit(circuit: Circuit, max_window: int = 64) -> Circuit:
    """
    Unitary-preserving rewrite up to global phase.

    Cancels inverse pairs (RX+/RX-, RY+/RY-, X/X, identical CNOTs) and merges
    literal RZ angles, looking past gates that commute with the candidate;
    zero-angle RZ gates are dropped. Passes repeat until nothing changes.
    Gates are only removed or merged into a later gate, so depth never grows.
    """
    gates = [g for g in circuit.gates if not _is_zero_rz(g)]
    passes = 0
    changed = True
    while changed:
        gates, changed = _cancellation_pass(gates, max_window)
        passes += 1
    logger.debug(
        f"optimize_circuit: {len(circuit.gates)} -> {len(gates)} gates in {passes} pass(es)"
    )
    return Circuit(circuit.nqubits, tuple(gates), circuit.parameter_slots)


def circuit_depth(circuit: Circuit) -> int:
    """Greedy ASAP layering; gates on disjoint qubits share a layer."""
    level: Dict[int, int] = {}
    depth = 0
    for gate in circuit.gates:
        layer = max(level.get(q, 0) for q in gate.qubits) + 1
        for q in gate.qubits:
            level[q] = layer
        depth = max(depth, layer)
    return depth


def circuit_stats(circuit: Circuit) -> Dict[str, int]:
    counts = circuit.counts()
    return {
        "gates": len(circuit.gates),
        "cnots": counts.get(GateKind.CNOT.value, 0),
        "depth": circuit_depth(circuit),
        "parameters": circuit.parameter_count,
    }


# ============================================================================
# Dense oracle
# ============================================================================

def embed_operator(ops: Mapping[int, np.ndarray], nqubits: int) -> sparse.csr_matrix:
    """Kronecker-embed single-qubit operators; qubit 0 is the rightmost factor."""
    result = sparse.identity(1, dtype=complex, format="csr")
    for q in range(nqubits - 1, -1, -1):
        factor = ops.get(q)
        factor = sparse.identity(2, dtype=complex, format="csr") if factor is None else sparse.csr_matrix(factor)
        result = sparse.kron(result, factor, format="csr")
    return result


def _single_qubit_matrix(kind: GateKind, angle: float) -> np.ndarray:
    if kind is GateKind.X:
        return _PAULI["x"]
    if kind is GateKind.RZ:
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    half = math.pi / 4 if kind in (GateKind.RX_PLUS, GateKind.RY_PLUS) else -math.pi / 4
    c, s = math.cos(half), math.sin(half)
    if kind in (GateKind.RX_PLUS, GateKind.RX_MINUS):
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _gate_sparse(gate: Gate, nqubits: int, angle: float = 0.0) -> sparse.csr_matrix:
    if gate.kind is GateKind.CNOT:
        control, target = gate.qubits
        return embed_operator({control: _PROJ0}, nqubits) + embed_operator(
            {control: _PROJ1, target: _PAULI["x"]}, nqubits
        )
    return embed_operator({gate.qubits[0]: _single_qubit_matrix(gate.kind, angle)}, nqubits)


def circuit_unitary(circuit: Circuit, parameters: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Dense unitary of the whole circuit (later gates multiply from the left).

    Args:
        circuit: Circuit on at most MAX_ORACLE_QUBITS qubits
        parameters: Values for every parameter slot, in slot order

    Returns:
        2^n x 2^n complex ndarray
    """
    if circuit.nqubits > MAX_ORACLE_QUBITS:
        raise InputError(f"dense unitary limited to {MAX_ORACLE_QUBITS} qubits, got {circuit.nqubits}")
    values = circuit.bind(parameters)
    unitary = np.eye(2 ** circuit.nqubits, dtype=complex)
    for gate in circuit.gates:
        angle = gate.rz_angle(values) if gate.kind is GateKind.RZ else 0.0
        unitary = _gate_sparse(gate, circuit.nqubits, angle) @ unitary
    return np.asarray(unitary)


def allclose_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    """Elementwise comparison after aligning b's global phase onto a."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    pivot = int(np.argmax(np.abs(a)))
    if abs(a[pivot]) < atol:
        return bool(np.allclose(b, 0, atol=atol))
    if abs(b[pivot]) < atol:
        return False
    phase = b[pivot] / a[pivot]
    phase /= abs(phase)
    return bool(np.allclose(a * phase, b, atol=atol, rtol=0))
