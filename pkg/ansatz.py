"""
Ansatz generator sequences

Three families: the XY ansatz (N(N-1) parameters), the full two-body ansatz
(9N(N-1)/2) and the layered Hamiltonian-variational ansatz (3pN on rings,
3p(N-1) on open chains). Generators are listed in application order and each
owns one parameter slot.

Slot names use 1-indexed sites: site k is qubit k-1, and site N is the last
qubit, which every generator not touching it reaches through a sigma^z factor.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from circuit import Circuit, PauliTerm, compile_generators
from errors import InputError, UnsupportedError
from lattice import Lattice

logger = logging.getLogger(__name__)

FAMILIES = ("xy", "two_body", "hamiltonian_variational")
INIT_MODES = ("zeros", "random")
TWO_BODY_AXES = tuple(b + a for b in "xyz" for a in "xyz")

Generator = Tuple[PauliTerm, str]


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    nqubits: int
    generators: Tuple[Generator, ...]
    layers: Optional[int] = None
    boundary: Optional[str] = None

    @property
    def parameter_count(self) -> int:
        return len(self.generators)

    @property
    def slots(self) -> Tuple[str, ...]:
        return tuple(slot for _, slot in self.generators)

    def circuit(self, initial_bits: Optional[str] = None) -> Circuit:
        """Unoptimized circuit, optionally preceded by the X layer for initial_bits."""
        return compile_generators(self.nqubits, self.generators, initial_bits)

    def to_dict(self) -> Dict:
        return {
            "family": self.family,
            "N": self.nqubits,
            "p": self.layers,
            "generators": [[term.axes, list(term.sites), slot] for term, slot in self.generators],
        }


def _pair_order(n: int) -> List[Tuple[int, int]]:
    """(k, l) pairs, 1-indexed: l from N-1 down to 1, k from N down to l+1."""
    return [(k, l) for l in range(n - 1, 0, -1) for k in range(n, l, -1)]


def _term(n: int, factors: Dict[int, str]) -> PauliTerm:
    """1-indexed factors plus the sigma_N^z phase factor when site N is absent."""
    factors = dict(factors)
    if n not in factors:
        factors[n] = "z"
    return PauliTerm.from_factors({site - 1: axis for site, axis in factors.items()})


def _check_size(family: str, n: int, minimum: int = 2) -> None:
    if n < minimum:
        raise InputError(f"{family} ansatz needs N >= {minimum}, got {n}")


def xy_ansatz(n: int) -> AnsatzSpec:
    """
    XY ansatz: the U_kl block then the U_lk block over all site pairs.

    U_kl generators are sigma_k^y sigma_l^x; U_lk swaps the roles of k and l.
    """
    _check_size("xy", n)
    pairs = _pair_order(n)
    generators: List[Generator] = []
    for k, l in pairs:
        generators.append((_term(n, {k: "y", l: "x"}), f"theta_{k}_{l}"))
    for k, l in pairs:
        generators.append((_term(n, {l: "y", k: "x"}), f"theta_{l}_{k}"))
    return AnsatzSpec("xy", n, tuple(generators))


def two_body_ansatz(n: int) -> AnsatzSpec:
    """All nine axis combinations per pair, beta on k and alpha on l, xx through zz."""
    _check_size("two_body", n)
    generators: List[Generator] = []
    for k, l in _pair_order(n):
        for axes in TWO_BODY_AXES:
            generators.append((_term(n, {k: axes[0], l: axes[1]}), f"theta_{k}_{l}_{axes}"))
    return AnsatzSpec("two_body", n, tuple(generators))


def hamiltonian_variational_ansatz(n: int, layers: int, boundary: str = "periodic") -> AnsatzSpec:
    """
    Layered Hamiltonian-variational ansatz for 1D lattices.

    Each layer walks the bonds (k, k+1), k = 1..N (the last bond wrapping to
    site 1) on a ring, or k = 1..N-1 on an open chain, and emits x, y, z
    generators per bond.
    """
    if boundary not in ("open", "periodic"):
        raise InputError(f"boundary must be 'open' or 'periodic', got '{boundary}'")
    _check_size("hamiltonian_variational", n, 3 if boundary == "periodic" else 2)
    if layers < 1:
        raise InputError(f"hamiltonian_variational ansatz needs at least one layer, got {layers}")
    bond_count = n if boundary == "periodic" else n - 1
    generators: List[Generator] = []
    for layer in range(1, layers + 1):
        for k in range(1, bond_count + 1):
            nxt = k % n + 1
            for axis in "xyz":
                generators.append((_term(n, {k: axis, nxt: axis}), f"theta_{layer}_{k}_{axis}"))
    return AnsatzSpec("hamiltonian_variational", n, tuple(generators), layers=layers, boundary=boundary)


def build_ansatz(family: str, lattice: Lattice, layers: int = 1) -> AnsatzSpec:
    """Dispatch on family; the layered ansatz is only defined on chains and rings."""
    if family == "xy":
        return xy_ansatz(lattice.sites)
    if family == "two_body":
        return two_body_ansatz(lattice.sites)
    if family == "hamiltonian_variational":
        if not lattice.is_one_dimensional:
            raise UnsupportedError(
                f"hamiltonian_variational ansatz is defined for chains and rings, not '{lattice.kind}'"
            )
        return hamiltonian_variational_ansatz(lattice.sites, layers, lattice.boundary)
    raise InputError(f"ansatz family must be one of {FAMILIES}, got '{family}'")


def init_parameters(count: int, mode: str = "zeros", seed: Optional[int] = None) -> np.ndarray:
    """
    Initial parameter vector.

    Args:
        count: Number of parameters P
        mode: 'zeros' or 'random' (i.i.d. uniform on (0, 2*pi))
        seed: Philox seed, required for random mode

    Returns:
        float64 array of length P
    """
    if count < 1:
        raise InputError(f"parameter count must be >= 1, got {count}")
    if mode == "zeros":
        return np.zeros(count)
    if mode != "random":
        raise InputError(f"init mode must be one of {INIT_MODES}, got '{mode}'")
    if seed is None:
        raise InputError("random parameter initialization needs a seed")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(np.nextafter(0.0, 1.0), 2 * math.pi, size=count)


def expected_parameter_count(family: str, n: int, layers: int = 1, boundary: str = "periodic") -> int:
    if family == "xy":
        return n * (n - 1)
    if family == "two_body":
        return 9 * n * (n - 1) // 2
    if family == "hamiltonian_variational":
        return 3 * layers * (n if boundary == "periodic" else n - 1)
    raise InputError(f"ansatz family must be one of {FAMILIES}, got '{family}'")
