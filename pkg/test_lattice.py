import json

import pytest

from conftest import heisenberg
from errors import InputError
from lattice import (
    CouplingModel,
    build_hamiltonian,
    build_lattice,
    neel_bitstring,
    product_state_energy,
)


@pytest.mark.parametrize(
    "kind, dims, boundary, sites, bonds",
    [
        ("ring", [4], "periodic", 4, 4),
        ("ring", [7], None, 7, 7),
        ("chain", [5], "open", 5, 4),
        ("chain", [1], None, 1, 0),
        ("ladder", [3, 2], "open", 6, 7),
        ("ladder", [4, 2], "periodic", 8, 12),
        ("square", [4, 4], "open", 16, 24),
        ("square", [3, 3], "periodic", 9, 18),
        ("square", [2, 3], "open", 6, 7),
        ("triangular", [5, 6], "open", 30, 69),
        ("triangular", [3, 4], "periodic", 12, 36),
    ],
)
def test_bond_counts(kind, dims, boundary, sites, bonds):
    lattice = build_lattice(kind, dims, boundary)
    assert lattice.sites == sites
    assert len(lattice.bonds) == bonds
    assert all(0 <= i < j < sites for i, j in lattice.bonds)
    assert len(set(lattice.bonds)) == bonds


def test_ring4_bonds_and_coloring():
    lattice = build_lattice("ring", [4], "periodic")
    assert set(lattice.bonds) == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert lattice.bipartition == ((0, 2), (1, 3))


def _walk_triangular(rows, cols):
    """Independent count: every site looks right, up and up-right."""
    count = 0
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0), (1, 1)):
                if r + dr < rows and c + dc < cols:
                    count += 1
    return count


def test_triangular_matches_grid_walk():
    for rows, cols in ((2, 2), (3, 5), (5, 6)):
        assert len(build_lattice("triangular", [rows, cols]).bonds) == _walk_triangular(rows, cols)


@pytest.mark.parametrize(
    "kind, dims, boundary, bipartite",
    [
        ("ring", [6], "periodic", True),
        ("ring", [5], "periodic", False),
        ("chain", [5], "open", True),
        ("ladder", [4, 2], "open", True),
        ("square", [3, 3], "open", True),
        ("triangular", [3, 3], "open", False),
    ],
)
def test_bipartition_is_proper(kind, dims, boundary, bipartite):
    lattice = build_lattice(kind, dims, boundary)
    assert lattice.is_bipartite == bipartite
    if bipartite:
        first = set(lattice.bipartition[0])
        for i, j in lattice.bonds:
            assert (i in first) != (j in first)


@pytest.mark.parametrize(
    "kind, dims, boundary",
    [
        ("ring", [2], "periodic"),
        ("ring", [4], "open"),
        ("chain", [0], "open"),
        ("ladder", [3, 3], "open"),
        ("triangular", [6], "open"),
        ("square", [1, 4], "periodic"),
        ("hexagonal", [4], "open"),
    ],
)
def test_invalid_lattices(kind, dims, boundary):
    with pytest.raises(InputError):
        build_lattice(kind, dims, boundary)


def test_isotropic_hamiltonian():
    hamiltonian = build_hamiltonian(build_lattice("ring", [4]))
    assert len(hamiltonian.terms) == 12
    assert all(t.coefficient == 1.0 for t in hamiltonian.terms)
    assert all(t.axes in ("xx", "yy", "zz") for t in hamiltonian.terms)

    pair = build_hamiltonian(build_lattice("chain", [2]))
    assert [(t.sites, t.axes) for t in pair.terms] == [((0, 1), "xx"), ((0, 1), "yy"), ((0, 1), "zz")]


def test_random_couplings_are_reproducible():
    first = heisenberg("ring", [10], seed=1234)
    second = heisenberg("ring", [10], seed=1234)
    other = heisenberg("ring", [10], seed=1235)
    coefficients = [t.coefficient for t in first.terms]
    assert coefficients == [t.coefficient for t in second.terms]
    assert coefficients != [t.coefficient for t in other.terms]
    assert all(0.0 < c <= 1.0 for c in coefficients)
    assert len(set(coefficients)) == len(coefficients)


def test_random_couplings_need_a_seed():
    with pytest.raises(InputError):
        CouplingModel("random")


def test_neel_bitstrings():
    assert neel_bitstring(build_lattice("ring", [4])) == "1010"
    assert neel_bitstring(build_lattice("chain", [3])) == "101"
    assert neel_bitstring(build_lattice("triangular", [5, 6])) == "1" * 15 + "0" * 15
    assert neel_bitstring(build_lattice("ring", [5])) == "11100"


@pytest.mark.parametrize(
    "n, bits, energy",
    [(4, "1010", -4.0), (4, "1111", 4.0), (6, None, -6.0), (8, None, -8.0)],
)
def test_product_state_energy(n, bits, energy):
    lattice = build_lattice("ring", [n])
    hamiltonian = build_hamiltonian(lattice)
    assert product_state_energy(hamiltonian, bits or neel_bitstring(lattice)) == energy


def test_product_state_energy_length_mismatch(ring4):
    with pytest.raises(InputError):
        product_state_energy(ring4, "101")


def test_hamiltonian_export_is_stable():
    document = heisenberg("square", [2, 2], seed=7).to_dict()
    assert list(document) == ["nqubits", "kind", "dims", "boundary", "bonds", "terms"]
    assert list(document["terms"][0]) == ["axes", "sites", "coeff"]
    assert json.dumps(document) == json.dumps(heisenberg("square", [2, 2], seed=7).to_dict())


def test_exported_coefficients_round_trip_exactly():
    hamiltonian = heisenberg("ring", [10], seed=99)
    document = json.loads(json.dumps(hamiltonian.to_dict()))
    assert [term["coeff"] for term in document["terms"]] == [t.coefficient for t in hamiltonian.terms]
