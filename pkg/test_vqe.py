import os

import numpy as np
import pytest

import run_store
from analysis import thermodynamic_extrapolation
from conftest import heisenberg
from errors import InputError, UnsupportedError
from exact import bethe_reference, ground_state_lanczos
from optimizers import finite_difference_gradient, minimize_quasi_newton
from vqe import (
    EnergyTrace,
    build_problem,
    check_budget,
    evaluate_energy,
    make_objective,
    resume_vqe,
    run_sweep,
    run_vqe,
)


def _trace(run):
    return run_store.read_trace(os.path.join(run.run_dir, run_store.TRACE_FILE))


def _read_bytes(run, name):
    with open(os.path.join(run.run_dir, name), "rb") as f:
        return f.read()


def test_four_site_ring_is_exact(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], exact_baseline=True, max_evals=3000))
    summary = run.summary
    assert summary["energy"] == pytest.approx(-8.0, abs=1e-6)
    assert summary["overlap"] >= 0.999
    assert summary["magnetization_z"] == pytest.approx(0.0, abs=1e-6)
    assert summary["spin_squared"] == pytest.approx(0.0, abs=1e-4)
    assert summary["e0"] == pytest.approx(-8.0, abs=1e-9)
    assert summary["stopped"] != "budget"
    assert summary["parameters"] == 12


@pytest.mark.slow
@pytest.mark.parametrize("kind, n", [("chain", 2), ("ring", 3), ("ring", 4), ("ring", 5), ("ring", 6)])
def test_small_sizes_match_exact(make_config, kind, n):
    run = run_vqe(make_config(kind=kind, dims=[n], exact_baseline=True, max_evals=20000))
    assert abs(run.summary["energy"] - run.summary["e0"]) <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize(
    "overrides",
    [
        {"kind": "ring", "dims": [6]},
        {"kind": "ring", "dims": [8], "coupling": "random", "coupling_seed": 77},
        {"kind": "ladder", "dims": [4, 2]},
        {"kind": "square", "dims": [3, 3], "boundary": "open"},
    ],
)
def test_energies_respect_variational_bound(make_config, overrides):
    config = make_config(max_evals=400, **overrides)
    problem = build_problem(config)
    e0 = ground_state_lanczos(problem.hamiltonian).energy
    run = run_vqe(config)
    assert all(row[1] >= e0 - 1e-9 for row in _trace(run))


def test_gradient_costs_p_plus_one_energy_evaluations(make_config):
    config = make_config(kind="ring", dims=[5])
    problem = build_problem(config)
    objective = make_objective(config, problem, limit=1000)
    finite_difference_gradient(objective, np.zeros(problem.ansatz.parameter_count))
    assert objective.evaluations == problem.ansatz.parameter_count + 1 == 21


def test_iterations_cost_at_least_one_gradient(make_config):
    config = make_config(kind="ring", dims=[4])
    problem = build_problem(config)
    objective = make_objective(config, problem, limit=200)
    marks = [0]
    minimize_quasi_newton(
        objective,
        np.zeros(problem.ansatz.parameter_count),
        callback=lambda nit, x, f: marks.append(objective.evaluations),
    )
    assert len(marks) > 3
    assert all(b - a >= problem.ansatz.parameter_count + 1 for a, b in zip(marks, marks[1:]))


def test_stationary_start_stops_immediately(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], ansatz="hamiltonian_variational", max_evals=500))
    assert run.summary["stopped"] == "gtol"
    assert run.summary["nit"] == 0
    assert run.summary["evaluations"] == 13
    assert run.summary["energy"] == pytest.approx(-4.0, abs=1e-9)


def test_budget_stop(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], max_evals=20))
    assert run.summary["stopped"] == "budget"
    assert run.summary["evaluations"] == 20
    rows = _trace(run)
    assert [row[0] for row in rows] == list(range(1, 21))
    assert all(row[3] == 0.0 for row in rows)
    assert run.summary["energy"] == min(row[1] for row in rows)


def test_budget_must_cover_one_gradient(make_config, output_dir):
    with pytest.raises(InputError, match="cannot cover one gradient"):
        run_vqe(make_config(kind="ring", dims=[4], max_evals=12, run_name="short"))
    with pytest.raises(InputError, match="max_evals"):
        run_vqe(make_config(kind="ring", dims=[4], max_evals=None, run_name="unbounded"))
    assert not output_dir.exists() or not any(output_dir.iterdir())
    problem = build_problem(make_config(kind="ring", dims=[4], max_evals=5, optimizer="gradient_free"))
    check_budget(make_config(kind="ring", dims=[4], max_evals=5, optimizer="gradient_free"), problem)


def test_single_evaluation_needs_no_budget(make_config):
    config = make_config(kind="ring", dims=[4], max_evals=None)
    assert build_problem(config).ansatz.parameter_count == 12
    assert evaluate_energy(config, np.zeros(12)) == pytest.approx(-4.0)


def test_problem_errors(make_config):
    with pytest.raises(UnsupportedError):
        build_problem(make_config(kind="square", dims=[2, 2], ansatz="hamiltonian_variational"))
    with pytest.raises(InputError):
        build_problem(make_config(kind="ring", dims=[4], initial_state="101"))


def test_zero_parameters_give_initial_energy(make_config):
    config = make_config(kind="ring", dims=[4])
    assert evaluate_energy(config, np.zeros(12)) == pytest.approx(-4.0)
    aligned = make_config(kind="ring", dims=[4], initial_state="1111")
    assert evaluate_energy(aligned, np.zeros(12)) == pytest.approx(4.0)
    with pytest.raises(InputError):
        evaluate_energy(config, np.zeros(3))


def test_run_directory_layout(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], max_evals=40, run_name="layout"))
    names = set(os.listdir(run.run_dir))
    assert {"config.json", "manifest.json", "trace.csv", "checkpoint.json", "summary.json"} <= names
    checkpoint = run_store.read_checkpoint(run.run_dir)
    assert checkpoint["evals"] == 40
    assert checkpoint["best_energy"] == run.summary["energy"]
    assert checkpoint["config_sha256"] == run.summary["config_sha256"]
    manifest = run_store.read_json(os.path.join(run.run_dir, "manifest.json"))
    assert manifest["circuit"]["optimized"]["depth"] <= manifest["circuit"]["unoptimized"]["depth"]
    assert len(manifest["legs"]) == 1
    index = run_store.load_run_index(run.config.output_dir)
    assert [r["run_dir"] for r in index] == [os.path.abspath(run.run_dir)]


def test_reruns_are_byte_identical(make_config):
    first = run_vqe(make_config(kind="ring", dims=[4], max_evals=150, run_name="a"))
    second = run_vqe(make_config(kind="ring", dims=[4], max_evals=150, run_name="b"))
    assert _read_bytes(first, "trace.csv") == _read_bytes(second, "trace.csv")
    assert _read_bytes(first, "summary.json") == _read_bytes(second, "summary.json")


def test_parallel_gradients_do_not_change_the_trace(make_config):
    serial = run_vqe(make_config(kind="ring", dims=[4], max_evals=100, run_name="serial"))
    threaded = run_vqe(make_config(kind="ring", dims=[4], max_evals=100, run_name="threaded", jobs=4))
    assert _read_bytes(serial, "trace.csv") == _read_bytes(threaded, "trace.csv")


def test_timing_is_opt_in(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], max_evals=30, record_timing=True))
    assert "wall_seconds" in run.summary
    assert any(row[3] > 0 for row in _trace(run))


def test_resume_continues_numbering(make_config):
    first = run_vqe(make_config(kind="ring", dims=[4], max_evals=40, run_name="resumable"))
    assert first.summary["stopped"] == "budget"
    resumed = resume_vqe(first.run_dir, 40)
    rows = _trace(resumed)
    assert [row[0] for row in rows] == list(range(1, len(rows) + 1))
    assert 40 < len(rows) <= 80
    assert resumed.summary["evaluations"] == len(rows)
    assert resumed.best_energy <= first.best_energy
    manifest = run_store.read_json(os.path.join(resumed.run_dir, "manifest.json"))
    assert len(manifest["legs"]) == 2
    assert resumed.summary["config_sha256"] == first.summary["config_sha256"]


def test_resume_checks_config(make_config):
    first = run_vqe(make_config(kind="ring", dims=[4], max_evals=30, run_name="guarded"))
    with pytest.raises(InputError):
        resume_vqe(first.run_dir, 10, expected=make_config(kind="ring", dims=[6]))
    with pytest.raises(InputError):
        resume_vqe(first.run_dir, 0)
    resume_vqe(first.run_dir, 10, expected=make_config(kind="ring", dims=[4], max_evals=999))


def test_resume_drops_rows_after_checkpoint(make_config):
    first = run_vqe(make_config(kind="ring", dims=[4], max_evals=30, run_name="torn"))
    trace_path = os.path.join(first.run_dir, run_store.TRACE_FILE)
    rows = run_store.read_trace(trace_path)
    run_store.write_trace(trace_path, [(31, -1.0, rows[-1][2], 0.0)], append=True)
    resumed = resume_vqe(first.run_dir, 5)
    assert [row[0] for row in _trace(resumed)] == list(range(1, 36))


def test_trace_invariants_are_checked():
    with pytest.raises(InputError):
        EnergyTrace.from_rows([(1, -1.0, -1.0, 0.0), (3, -2.0, -2.0, 0.0)])
    with pytest.raises(InputError):
        EnergyTrace.from_rows([(1, -1.0, -1.0, 0.0), (2, -2.0, -1.0, 0.0)])


def test_sampled_runs_are_deterministic(make_config):
    values = dict(kind="ring", dims=[4], estimator="sampled", shots=600, sample_seed=5, max_evals=40)
    serial = run_vqe(make_config(run_name="s1", **values))
    threaded = run_vqe(make_config(run_name="s2", jobs=3, **values))
    assert _read_bytes(serial, "trace.csv") == _read_bytes(threaded, "trace.csv")
    assert "exact_energy" in serial.summary


def test_gradient_free_run(make_config):
    run = run_vqe(make_config(kind="ring", dims=[4], optimizer="gradient_free", max_evals=150))
    assert run.summary["optimizer"] == "gradient_free"
    assert run.summary["evaluations"] <= 150
    assert run.summary["energy"] < -4.0
    assert all(row[1] >= -8.0 - 1e-9 for row in _trace(run))


def test_sweep_runs_each_size(make_config):
    config = make_config(kind="ring", ansatz="hamiltonian_variational", max_evals=60, run_name="hva")
    summaries = run_sweep(config, [4, 6])
    assert [s["N"] for s in summaries] == [4, 6]
    assert sorted(os.listdir(config.output_dir)) == ["hva-N4", "hva-N6", "run_index.json"]
    assert [r["N"] for r in run_store.load_run_index(config.output_dir)] == [4, 6]


def test_sweep_rejects_square_lattices(make_config):
    with pytest.raises(InputError):
        run_sweep(make_config(kind="square", dims=[2, 2]), [3])


@pytest.mark.slow
def test_sweep_in_processes_matches_serial(make_config, tmp_path):
    serial = run_sweep(make_config(kind="ring", max_evals=80, run_name="p"), [4, 5], jobs=1)
    other = make_config(kind="ring", max_evals=80, run_name="p", output_dir=str(tmp_path / "b"))
    parallel = run_sweep(other, [4, 5], jobs=2)
    assert [s["energy"] for s in serial] == [s["energy"] for s in parallel]
    index = run_store.load_run_index(other.output_dir)
    assert sorted(r["N"] for r in index) == [4, 5]


@pytest.mark.long
@pytest.mark.parametrize("n", [10, 12])
def test_zero_init_beats_random_init(make_config, n):
    zeros = run_vqe(make_config(kind="ring", dims=[n], max_evals=1500, run_name=f"z{n}"))
    random = run_vqe(make_config(kind="ring", dims=[n], max_evals=1500, init="random", init_seed=11, run_name=f"r{n}"))
    assert zeros.best_energy < random.best_energy


@pytest.mark.long
def test_quasi_newton_beats_gradient_free(make_config):
    values = dict(kind="ring", dims=[10], coupling="random", coupling_seed=2021, max_evals=2000)
    quasi_newton = run_vqe(make_config(run_name="qn", **values))
    gradient_free = run_vqe(make_config(run_name="nm", optimizer="gradient_free", **values))
    assert quasi_newton.best_energy <= gradient_free.best_energy


@pytest.mark.long
def test_vqe_energies_extrapolate_to_bethe_value(make_config):
    summaries = [
        run_vqe(make_config(kind="ring", dims=[n], max_evals=200_000, run_name=f"thermo{n}")).summary
        for n in (10, 12, 14, 16, 18)
    ]
    assert abs(thermodynamic_extrapolation(summaries).estimate - bethe_reference()) <= 0.05


def test_exact_baseline_matches_lanczos(make_config):
    run = run_vqe(make_config(kind="chain", dims=[3], exact_baseline=True, max_evals=300))
    e0 = ground_state_lanczos(heisenberg("chain", [3])).energy
    assert run.summary["e0"] == pytest.approx(e0)
    assert run.summary["gap_per_spin"] == pytest.approx(abs(run.summary["energy"] - e0) / 3)
