"""
Spin lattices and Heisenberg Hamiltonians

Builds chains, rings, ladders, square and triangular lattices, assigns
isotropic or random (0, 1] couplings per bond and axis, and provides the
Neel / half-split initial basis states.

2D sites are numbered row-major: site = row * cols + col, with row 0 the
bottom row. Triangular lattices add the diagonal (r, c)-(r+1, c+1) to every
unit cell of the square lattice.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from circuit import PauliTerm
from errors import InputError

logger = logging.getLogger(__name__)

KINDS = ("chain", "ring", "ladder", "square", "triangular")
BOUNDARIES = ("open", "periodic")
COUPLING_MODES = ("isotropic", "random")
TRIANGULAR_DIAGONAL = "(r,c)-(r+1,c+1)"


@dataclass(frozen=True)
class Lattice:
    kind: str
    dims: Tuple[int, ...]
    boundary: str
    sites: int
    bonds: Tuple[Tuple[int, int], ...]
    bipartition: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None
    metadata: Dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    @property
    def is_one_dimensional(self) -> bool:
        return self.kind in ("chain", "ring")


@dataclass(frozen=True)
class CouplingModel:
    mode: str = "isotropic"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.mode not in COUPLING_MODES:
            raise InputError(f"coupling mode must be one of {COUPLING_MODES}, got '{self.mode}'")
        if self.mode == "random" and self.seed is None:
            raise InputError("random couplings need a seed")


@dataclass(frozen=True)
class Hamiltonian:
    nqubits: int
    terms: Tuple[PauliTerm, ...]
    lattice: Lattice
    coupling: CouplingModel = CouplingModel()

    def to_dict(self) -> Dict:
        """JSON document with the fixed field order of the lattice export."""
        return {
            "nqubits": self.nqubits,
            "kind": self.lattice.kind,
            "dims": list(self.lattice.dims),
            "boundary": self.lattice.boundary,
            "bonds": [list(b) for b in self.lattice.bonds],
            "terms": [
                {"axes": t.axes, "sites": list(t.sites), "coeff": t.coefficient}
                for t in self.terms
            ],
        }


def _ring_bonds(n: int) -> List[Tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]


def _grid_bonds(rows: int, cols: int, wrap_rows: bool, wrap_cols: bool, diagonal: bool) -> List[Tuple[int, int]]:
    def site(r, c):
        return (r % rows) * cols + (c % cols)

    bonds = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols or wrap_cols:
                bonds.append((site(r, c), site(r, c + 1)))
            if r + 1 < rows or wrap_rows:
                bonds.append((site(r, c), site(r + 1, c)))
            if diagonal and (r + 1 < rows or wrap_rows) and (c + 1 < cols or wrap_cols):
                bonds.append((site(r, c), site(r + 1, c + 1)))
    return bonds


def _normalize(bonds: Sequence[Tuple[int, int]]) -> Tuple[Tuple[int, int], ...]:
    seen = set()
    ordered = []
    for i, j in bonds:
        if i == j:
            raise InputError(f"self-bond on site {i}")
        bond = (min(i, j), max(i, j))
        if bond in seen:
            raise InputError(f"duplicate bond {bond}")
        seen.add(bond)
        ordered.append(bond)
    return tuple(sorted(ordered))


def _two_coloring(sites: int, bonds: Sequence[Tuple[int, int]]):
    adjacency: List[List[int]] = [[] for _ in range(sites)]
    for i, j in bonds:
        adjacency[i].append(j)
        adjacency[j].append(i)
    color = [-1] * sites
    for start in range(sites):
        if color[start] != -1:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if color[v] == -1:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    return None
    first = tuple(s for s in range(sites) if color[s] == 0)
    second = tuple(s for s in range(sites) if color[s] == 1)
    return first, second


def build_lattice(kind: str, dims: Sequence[int], boundary: Optional[str] = None) -> Lattice:
    """
    Build a lattice and its bond list.

    Args:
        kind: chain | ring | ladder | square | triangular
        dims: [N] for chains/rings, [rows, cols] otherwise (ladders: [L, 2])
        boundary: open | periodic; defaults to periodic for rings, open otherwise

    Returns:
        Lattice with sorted (i < j) bonds and a bipartition when one exists
    """
    if kind not in KINDS:
        raise InputError(f"lattice kind must be one of {KINDS}, got '{kind}'")
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise InputError(f"lattice dims must be positive, got {list(dims)}")
    if boundary is None:
        boundary = "periodic" if kind == "ring" else "open"
    if boundary not in BOUNDARIES:
        raise InputError(f"boundary must be one of {BOUNDARIES}, got '{boundary}'")

    metadata: Dict[str, str] = {"site_indexing": "row-major, row 0 at the bottom"}
    if kind in ("chain", "ring"):
        if len(dims) != 1:
            raise InputError(f"{kind} takes one dimension, got {list(dims)}")
        n = dims[0]
        if kind == "ring":
            if boundary != "periodic":
                raise InputError("a ring is periodic; use kind 'chain' for open boundaries")
            if n < 3:
                raise InputError(f"a periodic ring needs at least 3 sites, got {n}")
            bonds = _ring_bonds(n)
        else:
            if boundary != "open":
                raise InputError("a chain is open; use kind 'ring' for periodic boundaries")
            bonds = [(i, i + 1) for i in range(n - 1)]
        sites = n
    else:
        if len(dims) != 2:
            raise InputError(f"{kind} takes two dimensions [rows, cols], got {list(dims)}")
        rows, cols = dims
        periodic = boundary == "periodic"
        if kind == "ladder":
            if cols != 2:
                raise InputError(f"a ladder is L x 2, got second dimension {cols}")
            if periodic and rows < 3:
                raise InputError(f"periodic ladder legs need at least 3 rungs, got {rows}")
            bonds = _grid_bonds(rows, cols, wrap_rows=periodic, wrap_cols=False, diagonal=False)
        else:
            if periodic and min(rows, cols) < 3:
                raise InputError(f"periodic {kind} lattices need both dims >= 3, got {list(dims)}")
            bonds = _grid_bonds(rows, cols, periodic, periodic, diagonal=kind == "triangular")
            if kind == "triangular":
                metadata["diagonal"] = TRIANGULAR_DIAGONAL
        sites = rows * cols

    normalized = _normalize(bonds)
    bipartition = _two_coloring(sites, normalized)
    lattice = Lattice(kind, dims, boundary, sites, normalized, bipartition, metadata)
    logger.debug(f"Built {kind} {list(dims)} ({boundary}): {sites} sites, {len(normalized)} bonds")
    return lattice


def build_hamiltonian(lattice: Lattice, coupling_model: Optional[CouplingModel] = None) -> Hamiltonian:
    """
    Heisenberg Hamiltonian: J^xx XX + J^yy YY + J^zz ZZ on every bond.

    Random couplings are drawn per (bond, axis) in bond order, x then y then z,
    as 1 - u with u uniform on [0, 1) from a Philox generator.
    """
    coupling_model = coupling_model or CouplingModel()
    rng = None
    if coupling_model.mode == "random":
        rng = np.random.Generator(np.random.Philox(coupling_model.seed))
    terms = []
    for i, j in lattice.bonds:
        for axis in "xyz":
            coefficient = 1.0 if rng is None else 1.0 - float(rng.random())
            terms.append(PauliTerm((i, j), axis * 2, coefficient))
    return Hamiltonian(lattice.sites, tuple(terms), lattice, coupling_model)


def neel_bitstring(lattice: Lattice) -> str:
    """
    Initial basis bitstring; character i is the bit of site i.

    Bipartite lattices: the color class holding site 0 gets '1'. Otherwise the
    first ceil(N/2) site indices get '1', regardless of position.
    """
    n = lattice.sites
    if lattice.bipartition is not None:
        ones = set(lattice.bipartition[0])
        return "".join("1" if s in ones else "0" for s in range(n))
    half = (n + 1) // 2
    return "1" * half + "0" * (n - half)


def validate_bitstring(bitstring: str, nqubits: int) -> str:
    if len(bitstring) != nqubits:
        raise InputError(f"bitstring has length {len(bitstring)}, expected {nqubits}")
    if set(bitstring) - {"0", "1"}:
        raise InputError(f"bitstring must contain only 0/1, got '{bitstring}'")
    return bitstring


def product_state_energy(hamiltonian: Hamiltonian, bitstring: str) -> float:
    """<b|H|b> for a computational basis state; only zz terms contribute."""
    validate_bitstring(bitstring, hamiltonian.nqubits)
    energy = 0.0
    for term in hamiltonian.terms:
        if set(term.axes) != {"z"}:
            continue
        parity = 1.0
        for site in term.sites:
            if bitstring[site] == "1":
                parity = -parity
        energy += term.coefficient * parity
    return energy
