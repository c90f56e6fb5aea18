"""
Variational loop

Builds the problem from a VqeConfig (lattice, Hamiltonian, ansatz, compiled
and optimized circuit), wraps the energy in a budgeted objective that counts
and traces every evaluation, drives one of the optimizers, and persists the
run directory. Runs resume from their last checkpoint with a fresh inverse
Hessian.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import run_store
from ansatz import AnsatzSpec, build_ansatz, init_parameters
from circuit import Circuit, circuit_stats, optimize_circuit
from config import VqeConfig, manifest_header
from engine import (
    StateVector,
    apply_circuit,
    estimate_energy_sampled,
    expectation,
    magnetization_z,
    overlap_sq,
    total_spin_squared,
)
from errors import BudgetExhausted, InputError
from exact import ground_state_lanczos
from lattice import (
    CouplingModel,
    Hamiltonian,
    Lattice,
    build_hamiltonian,
    build_lattice,
    neel_bitstring,
    validate_bitstring,
)
from optimizers import OptimizerOptions, minimize_gradient_free, minimize_quasi_newton

logger = logging.getLogger(__name__)


# ============================================================================
# Trace
# ============================================================================

@dataclass(frozen=True)
class TraceRecord:
    eval_index: int
    energy: float
    best: float
    seconds: float = 0.0

    def row(self) -> run_store.TraceRow:
        return (self.eval_index, self.energy, self.best, self.seconds)


@dataclass
class EnergyTrace:
    """Every energy evaluation in order; best is the running minimum."""

    records: List[TraceRecord] = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return len(self.records)

    @property
    def best(self) -> float:
        return self.records[-1].best if self.records else float("inf")

    def append(self, energy: float, seconds: float = 0.0) -> TraceRecord:
        record = TraceRecord(self.evaluations + 1, float(energy), min(self.best, float(energy)), seconds)
        self.records.append(record)
        return record

    def rows(self, start: int = 0) -> List[run_store.TraceRow]:
        return [r.row() for r in self.records[start:]]

    @classmethod
    def from_rows(cls, rows: Sequence[run_store.TraceRow]) -> "EnergyTrace":
        trace = cls()
        for index, energy, best, seconds in rows:
            record = trace.append(energy, seconds)
            if index != record.eval_index or best != record.best:
                raise InputError(
                    f"trace row {index} breaks the trace invariants "
                    f"(expected eval {record.eval_index}, best {record.best!r})"
                )
        return trace


# ============================================================================
# Problem and objective
# ============================================================================

@dataclass(frozen=True)
class VqeProblem:
    lattice: Lattice
    hamiltonian: Hamiltonian
    ansatz: AnsatzSpec
    initial_bits: str
    circuit: Circuit
    stats: Dict[str, Dict[str, int]]

    @property
    def nqubits(self) -> int:
        return self.hamiltonian.nqubits


def build_problem(config: VqeConfig) -> VqeProblem:
    """Lattice -> Hamiltonian -> ansatz -> circuit (with the initial X layer), compiled once."""
    lattice = build_lattice(config.kind, config.dims, config.boundary)
    hamiltonian = build_hamiltonian(lattice, CouplingModel(config.coupling, config.coupling_seed))
    spec = build_ansatz(config.ansatz, lattice, config.layers)
    if config.initial_state == "neel":
        initial_bits = neel_bitstring(lattice)
    else:
        initial_bits = validate_bitstring(config.initial_state, lattice.sites)
    raw = spec.circuit(initial_bits)
    compiled = optimize_circuit(raw) if config.optimize_circuit else raw
    stats = {"unoptimized": circuit_stats(raw), "optimized": circuit_stats(compiled)}
    logger.info(
        f"Problem: {lattice.kind} {list(lattice.dims)} N={lattice.sites}, {config.ansatz} ansatz "
        f"P={spec.parameter_count}, depth {stats['unoptimized']['depth']} -> {stats['optimized']['depth']}"
    )
    return VqeProblem(lattice, hamiltonian, spec, initial_bits, compiled, stats)


def check_budget(config: VqeConfig, problem: VqeProblem) -> None:
    """A run needs an explicit budget; quasi-Newton also needs room for one gradient."""
    if config.max_evals is None:
        raise InputError("config field 'max_evals' is required (no default evaluation budget)")
    needed = problem.ansatz.parameter_count + 1
    if config.optimizer == "quasi_newton" and config.max_evals < needed:
        raise InputError(f"max_evals={config.max_evals} cannot cover one gradient ({needed} evaluations)")


class EnergyObjective:
    """
    Budgeted energy function of the ansatz parameters.

    Every call is one energy evaluation: it is counted, appended to the
    trace, and refused with BudgetExhausted once `limit` evaluations (over
    all legs of the run) have been made or the wall budget has elapsed.
    """

    def __init__(
        self,
        problem: VqeProblem,
        limit: int,
        estimator: str = "exact",
        shots: Optional[int] = None,
        sample_seed: Optional[int] = None,
        jobs: int = 1,
        wall_seconds: Optional[float] = None,
        record_timing: bool = False,
        trace: Optional[EnergyTrace] = None,
        best_params: Optional[np.ndarray] = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.problem = problem
        self.limit = limit
        self.estimator = estimator
        self.shots = shots
        self.sample_seed = sample_seed
        self.jobs = jobs
        self.wall_seconds = wall_seconds
        self.record_timing = record_timing
        self.trace = trace or EnergyTrace()
        self.best_params = None if best_params is None else np.array(best_params, dtype=float)
        self._clock = clock
        self._started = clock()

    @property
    def evaluations(self) -> int:
        return self.trace.evaluations

    @property
    def best_energy(self) -> float:
        return self.trace.best

    def prepare_state(self, parameters: Sequence[float]) -> StateVector:
        state = StateVector(self.problem.nqubits)
        return apply_circuit(state, self.problem.circuit, parameters, inplace=True)

    def _energy(self, parameters: np.ndarray, eval_index: int) -> float:
        state = self.prepare_state(parameters)
        if self.estimator == "sampled":
            seed = np.random.SeedSequence([self.sample_seed, eval_index])
            estimate, _ = estimate_energy_sampled(state, self.problem.hamiltonian, self.shots, seed)
            return estimate
        return expectation(state, self.problem.hamiltonian)

    def _allowance(self, requested: int) -> int:
        if self.wall_seconds is not None and self._clock() - self._started >= self.wall_seconds:
            raise BudgetExhausted("wall")
        remaining = self.limit - self.evaluations
        if remaining <= 0:
            raise BudgetExhausted("budget")
        return min(requested, remaining)

    def _record(self, parameters: np.ndarray, energy: float) -> float:
        seconds = self._clock() - self._started if self.record_timing else 0.0
        previous = self.trace.best
        self.trace.append(energy, seconds)
        if energy < previous or self.best_params is None:
            self.best_params = np.array(parameters, dtype=float)
        return energy

    def __call__(self, parameters: Sequence[float]) -> float:
        self._allowance(1)
        parameters = np.asarray(parameters, dtype=float)
        return self._record(parameters, self._energy(parameters, self.evaluations + 1))

    def evaluate_many(self, points: Sequence[Sequence[float]]) -> List[float]:
        """
        Evaluate a batch (a gradient stencil) on up to `jobs` threads.

        Results are recorded in batch order, so the trace does not depend on
        scheduling. If the budget covers only part of the batch, that part is
        evaluated and recorded before BudgetExhausted is raised.
        """
        allowed = self._allowance(len(points))
        batch = [np.asarray(p, dtype=float) for p in points[:allowed]]
        first = self.evaluations + 1
        indices = range(first, first + len(batch))
        if self.jobs > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                energies = list(pool.map(self._energy, batch, indices))
        else:
            energies = [self._energy(p, i) for p, i in zip(batch, indices)]
        values = [self._record(p, e) for p, e in zip(batch, energies)]
        if allowed < len(points):
            raise BudgetExhausted("budget")
        return values


def make_objective(config: VqeConfig, problem: VqeProblem, limit: int, **kwargs) -> EnergyObjective:
    return EnergyObjective(
        problem,
        limit,
        estimator=config.estimator,
        shots=config.shots,
        sample_seed=config.sample_seed,
        jobs=config.jobs,
        wall_seconds=config.wall_seconds,
        record_timing=config.record_timing,
        **kwargs,
    )


def evaluate_energy(config: VqeConfig, parameters: Sequence[float]) -> float:
    """One energy evaluation of the configured problem, outside any run."""
    problem = build_problem(config)
    if len(parameters) != problem.ansatz.parameter_count:
        raise InputError(f"expected {problem.ansatz.parameter_count} parameters, got {len(parameters)}")
    return make_objective(config, problem, limit=1)(parameters)


# ============================================================================
# Runs
# ============================================================================

@dataclass
class VqeRun:
    config: VqeConfig
    run_dir: str
    trace: EnergyTrace
    best_params: np.ndarray
    best_energy: float
    stopped: str
    nit: int
    summary: Dict[str, Any]
    final_state: StateVector
    index_record: Dict[str, Any] = field(default_factory=dict)


def _iso_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _rng_record(config: VqeConfig, evaluations: int) -> Dict[str, Any]:
    return {
        "generator": "philox",
        "init_seed": config.init_seed,
        "sample_seed": config.sample_seed,
        "next_eval": evaluations + 1,
    }


def _summarize(
    config: VqeConfig,
    problem: VqeProblem,
    objective: EnergyObjective,
    stopped: str,
    nit: int,
    state: StateVector,
) -> Dict[str, Any]:
    n = problem.nqubits
    energy = objective.best_energy
    summary: Dict[str, Any] = {
        "kind": problem.lattice.kind,
        "dims": list(problem.lattice.dims),
        "boundary": problem.lattice.boundary,
        "coupling": config.coupling,
        "N": n,
        "ansatz": config.ansatz,
        "parameters": problem.ansatz.parameter_count,
        "optimizer": config.optimizer,
        "estimator": config.estimator,
        "init": config.init,
        "config_sha256": config.digest(),
        "energy": energy,
        "energy_per_spin": energy / n,
        "evaluations": objective.evaluations,
        "stopped": stopped,
        "nit": nit,
        "magnetization_z": magnetization_z(state),
        "spin_squared": total_spin_squared(state),
    }
    if config.estimator == "sampled":
        summary["exact_energy"] = expectation(state, problem.hamiltonian)
    if config.exact_baseline:
        ground = ground_state_lanczos(problem.hamiltonian, want_vector=True)
        summary.update(
            {
                "e0": ground.energy,
                "e0_per_spin": ground.energy_per_spin,
                "gap_per_spin": abs(energy - ground.energy) / n,
                "overlap": overlap_sq(state, ground.state()),
                "lanczos_converged": ground.converged,
            }
        )
    return summary


def _drive(
    config: VqeConfig,
    problem: VqeProblem,
    run_dir: str,
    x0: np.ndarray,
    objective: EnergyObjective,
    manifest: Dict[str, Any],
    record_index: bool = True,
) -> VqeRun:
    trace_path = os.path.join(run_dir, run_store.TRACE_FILE)
    digest = config.digest()
    flushed = objective.evaluations
    started_at = _iso_now()
    wall_start = time.monotonic()

    def flush() -> None:
        nonlocal flushed
        run_store.write_trace(trace_path, objective.trace.rows(flushed), append=True)
        flushed = objective.evaluations

    def checkpoint(params: np.ndarray) -> None:
        flush()
        run_store.write_checkpoint(
            run_dir,
            {
                "params": [float(v) for v in params],
                "evals": objective.evaluations,
                "best_energy": objective.best_energy,
                "best_params": [float(v) for v in objective.best_params],
                "rng": _rng_record(config, objective.evaluations),
                "config_sha256": digest,
            },
        )

    options = OptimizerOptions(
        fd_step=config.fd_step,
        gtol=config.gtol,
        ftol=config.ftol,
        initial_edge=config.initial_edge,
        xatol=config.xatol,
        fatol=config.fatol,
    )
    minimize = minimize_quasi_newton if config.optimizer == "quasi_newton" else minimize_gradient_free
    try:
        result = minimize(objective, x0, options, callback=lambda nit, x, f: checkpoint(x))
    finally:
        flush()

    best_params = objective.best_params if objective.best_params is not None else np.asarray(x0, dtype=float)
    checkpoint(best_params)
    state = objective.prepare_state(best_params)
    summary = _summarize(config, problem, objective, result.stopped, result.nit, state)
    wall = time.monotonic() - wall_start
    if config.record_timing:
        summary["wall_seconds"] = wall
    run_store.write_json(os.path.join(run_dir, run_store.SUMMARY_FILE), summary)

    legs = list(manifest.get("legs", []))
    legs.append(
        {
            "started_at": started_at,
            "finished_at": _iso_now(),
            "wall_seconds": wall,
            "evaluations": objective.evaluations,
            "stopped": result.stopped,
        }
    )
    manifest = {
        **manifest_header(),
        "config_sha256": digest,
        "seeds": {
            "coupling_seed": config.coupling_seed,
            "init_seed": config.init_seed,
            "sample_seed": config.sample_seed,
        },
        "circuit": problem.stats,
        "initial_bits": problem.initial_bits,
        "ansatz": problem.ansatz.to_dict(),
        "legs": legs,
    }
    run_store.write_manifest(run_dir, manifest)
    index_record = {
        "run_dir": os.path.abspath(run_dir),
        "config_sha256": digest,
        "kind": problem.lattice.kind,
        "N": problem.nqubits,
        "ansatz": config.ansatz,
        "energy": objective.best_energy,
        "evaluations": objective.evaluations,
        "stopped": result.stopped,
    }
    if record_index:
        run_store.record_run(config.output_dir, index_record)
    logger.info(
        f"✅ VQE {result.stopped}: E_f={objective.best_energy:.12f} after {objective.evaluations} evaluations "
        f"({run_dir})"
    )
    return VqeRun(
        config=config,
        run_dir=run_dir,
        trace=objective.trace,
        best_params=best_params,
        best_energy=objective.best_energy,
        stopped=result.stopped,
        nit=result.nit,
        summary=summary,
        final_state=state,
        index_record=index_record,
    )


def run_vqe(config: VqeConfig, record_index: bool = True) -> VqeRun:
    """
    Fresh run into config.run_dir(); an existing trace there is overwritten.

    record_index=False leaves the run index to the caller (sweep workers).
    """
    problem = build_problem(config)
    check_budget(config, problem)
    run_dir = config.run_dir()
    os.makedirs(run_dir, exist_ok=True)
    run_store.write_json(os.path.join(run_dir, run_store.CONFIG_FILE), config.to_dict())
    run_store.write_trace(os.path.join(run_dir, run_store.TRACE_FILE), [])
    x0 = init_parameters(problem.ansatz.parameter_count, config.init, config.init_seed)
    objective = make_objective(config, problem, limit=config.max_evals)
    logger.info(f"🚀 Starting VQE run in {run_dir} (budget {config.max_evals} evaluations)")
    return _drive(config, problem, run_dir, x0, objective, manifest={}, record_index=record_index)


def resume_vqe(
    run_dir: str,
    extra_evals: int,
    expected: Optional[VqeConfig] = None,
    wall_seconds: Optional[float] = None,
    jobs: Optional[int] = None,
) -> VqeRun:
    """
    Continue a run from its checkpoint with `extra_evals` more evaluations.

    Evaluation numbering continues from the checkpoint and the trace is
    appended to. `expected`, when given, must have the checkpoint's digest.
    """
    if extra_evals < 1:
        raise InputError(f"extra evaluation budget must be >= 1, got {extra_evals}")
    stored = run_store.read_json(os.path.join(run_dir, run_store.CONFIG_FILE), "run config")
    config = VqeConfig.from_dict(stored)
    checkpoint = run_store.read_checkpoint(run_dir)
    digest = checkpoint["config_sha256"]
    if digest != config.digest():
        raise InputError(f"checkpoint digest {digest[:12]} does not match the stored run config")
    if expected is not None and expected.digest() != digest:
        raise InputError(f"config digest {expected.digest()[:12]} does not match checkpoint {digest[:12]}")

    location = os.path.abspath(run_dir)
    overrides: Dict[str, Any] = {"output_dir": os.path.dirname(location), "run_name": os.path.basename(location)}
    if wall_seconds is not None:
        overrides["wall_seconds"] = wall_seconds
    if jobs is not None:
        overrides["jobs"] = jobs
    config = replace(config, **overrides)

    problem = build_problem(config)
    check_budget(config, problem)
    params = np.asarray(checkpoint["params"], dtype=float)
    if params.size != problem.ansatz.parameter_count:
        raise InputError(
            f"corrupt checkpoint: {params.size} parameters for a {problem.ansatz.parameter_count}-parameter ansatz"
        )
    trace_path = os.path.join(run_dir, run_store.TRACE_FILE)
    run_store.truncate_trace(trace_path, checkpoint["evals"])
    trace = EnergyTrace.from_rows(run_store.read_trace(trace_path))
    if trace.evaluations and trace.best != float(checkpoint["best_energy"]):
        raise InputError("corrupt checkpoint: best_energy disagrees with the trace")

    objective = make_objective(
        config,
        problem,
        limit=checkpoint["evals"] + extra_evals,
        trace=trace,
        best_params=checkpoint["best_params"],
    )
    manifest_path = os.path.join(run_dir, run_store.MANIFEST_FILE)
    manifest = run_store.read_json(manifest_path, "manifest") if os.path.exists(manifest_path) else {}
    logger.info(f"📂 Resuming {run_dir} at evaluation {checkpoint['evals'] + 1} (+{extra_evals})")
    return _drive(config, problem, run_dir, params, objective, manifest)


# ============================================================================
# Sweeps
# ============================================================================

def _sweep_dims(config: VqeConfig, size: int):
    if config.kind in ("chain", "ring"):
        return (size,)
    if config.kind == "ladder":
        return (size, 2)
    raise InputError(f"sweeps vary the length of chains, rings and ladders, not '{config.kind}'")


def _sweep_worker(values: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    run = run_vqe(VqeConfig.from_dict(values), record_index=False)
    return run.summary, run.index_record


def run_sweep(config: VqeConfig, sizes: Sequence[int], jobs: int = 1) -> List[Dict[str, Any]]:
    """
    The same configuration over several lattice sizes, one process per run.

    Each size gets its own run directory (<run_name or 'sweep'>-N<size>);
    summaries come back in the order of `sizes`.
    """
    if not sizes:
        raise InputError("sweep needs at least one lattice size")
    base = config.run_name or "sweep"
    configs = [
        replace(config, dims=_sweep_dims(config, size), run_name=f"{base}-N{size}", jobs=1).to_dict()
        for size in sizes
    ]
    logger.info(f"Sweeping sizes {list(sizes)} on {jobs} process(es)")
    if jobs <= 1:
        results = [_sweep_worker(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, configs))
    run_store.record_runs(config.output_dir, [record for _, record in results])
    return [summary for summary, _ in results]
