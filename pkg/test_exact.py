import math

import numpy as np
import pytest

from analysis import linear_fit, thermodynamic_extrapolation
from conftest import heisenberg
from engine import expectation
from errors import InputError
from exact import bethe_reference, dense_ground_energy, ground_state_lanczos


def test_two_site_singlet():
    result = ground_state_lanczos(heisenberg("chain", [2]))
    assert result.energy == pytest.approx(-3.0, abs=1e-12)
    assert result.converged


def test_four_site_ring():
    result = ground_state_lanczos(heisenberg("ring", [4]), want_vector=True)
    assert result.energy == pytest.approx(-8.0, abs=1e-9)
    assert result.residual <= 1e-10
    state = result.state()
    assert state.norm() == pytest.approx(1.0)
    assert expectation(state, heisenberg("ring", [4])) == pytest.approx(-8.0, abs=1e-9)


def _random_cases():
    rng = np.random.Generator(np.random.Philox(99))
    shapes = [("ring", [n]) for n in range(3, 11)] + [("chain", [n]) for n in range(2, 11)]
    shapes += [("ladder", [3, 2]), ("square", [2, 3]), ("triangular", [3, 3])]
    cases = []
    for i in range(20):
        kind, dims = shapes[int(rng.integers(len(shapes)))]
        cases.append((kind, dims, 1000 + i))
    return cases


@pytest.mark.slow
@pytest.mark.parametrize("kind, dims, seed", _random_cases())
def test_lanczos_matches_dense(kind, dims, seed):
    hamiltonian = heisenberg(kind, dims, seed=seed)
    result = ground_state_lanczos(hamiltonian)
    assert result.converged
    assert abs(result.energy - dense_ground_energy(hamiltonian)) <= 1e-8


def test_restarts_reach_the_same_energy():
    hamiltonian = heisenberg("ring", [8], seed=5)
    small = ground_state_lanczos(hamiltonian, max_iter=20)
    assert small.converged
    assert small.energy == pytest.approx(dense_ground_energy(hamiltonian), abs=1e-8)


def test_ritz_trace_is_monotone():
    result = ground_state_lanczos(heisenberg("ring", [6]))
    assert all(b <= a + 1e-10 for a, b in zip(result.ritz_trace, result.ritz_trace[1:]))
    assert result.ritz_trace[-1] == pytest.approx(result.energy)


def test_ritz_trace_is_monotone_across_restarts():
    result = ground_state_lanczos(heisenberg("ring", [8], seed=5), max_iter=12)
    assert result.iterations > 12
    trace = result.ritz_trace
    assert len(trace) == result.iterations
    assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))
    assert trace[0] > trace[-1]


def test_unconverged_result_is_flagged():
    result = ground_state_lanczos(heisenberg("ring", [10]), max_iter=3, max_restarts=0)
    assert not result.converged
    assert result.residual > 1e-10


def test_lanczos_rejects_bad_arguments():
    with pytest.raises(InputError):
        ground_state_lanczos(heisenberg("ring", [4]), tol=0.0)
    with pytest.raises(InputError):
        ground_state_lanczos(heisenberg("ring", [4]), max_iter=1)


def test_vector_is_needed_for_state():
    with pytest.raises(InputError):
        ground_state_lanczos(heisenberg("ring", [4])).state()


def test_bethe_reference():
    assert bethe_reference() == pytest.approx(-1.7725887, abs=1e-7)
    assert bethe_reference() == 1 - 4 * math.log(2)


RING_SIZES = (6, 8, 10, 12, 14, 16)


@pytest.fixture(scope="module")
def ring_energies():
    return {n: ground_state_lanczos(heisenberg("ring", [n])).energy for n in RING_SIZES}


@pytest.mark.slow
def test_exact_energies_extrapolate_to_bethe_value(ring_energies):
    # a straight line through E0(N) keeps a 1/N correction of about 0.025 per spin at N=8..16
    fit = linear_fit([(n, ring_energies[n]) for n in (8, 10, 12, 14, 16)])
    assert 0.0 < fit.slope - bethe_reference() <= 0.03


@pytest.mark.slow
def test_energy_per_spin_rises_toward_bethe_value():
    per_spin = [ground_state_lanczos(heisenberg("ring", [n])).energy / n for n in (4, 8, 12, 16)]
    assert per_spin[0] == pytest.approx(-2.0)
    assert all(a < b for a, b in zip(per_spin, per_spin[1:]))
    assert all(value < bethe_reference() for value in per_spin)


@pytest.mark.slow
def test_extrapolation_improves_as_the_size_range_grows(ring_energies):
    summaries = [{"N": n, "kind": "ring", "e0": e} for n, e in ring_energies.items()]
    gaps = [
        abs(thermodynamic_extrapolation(summaries[:count], source="e0").difference)
        for count in range(3, len(summaries) + 1)
    ]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.04
