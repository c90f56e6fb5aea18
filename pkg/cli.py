"""
Command-line entry point for the Heisenberg VQE toolkit

Subcommands: lattice, compile, vqe, resume, exact, extrapolate, plot, sweep.
JSON and circuit text go to stdout, logs to stderr. Exit codes: 0 success
(including budget stops), 2 input error, 3 unsupported combination,
4 optimizer abort, 5 insufficient data.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables FIRST (VQE_OUTPUT_DIR, VQE_LOG_LEVEL, VQE_JOBS)
load_dotenv()

import run_store
from analysis import ABSCISSAS, error_scaling_fit, linear_fit, thermodynamic_extrapolation
from ansatz import FAMILIES, INIT_MODES, build_ansatz
from circuit import circuit_stats, optimize_circuit
from config import ESTIMATORS, OPTIMIZERS, VERSION, VqeConfig, manifest_header, resolve_config
from errors import VqeError
from exact import DEFAULT_MAX_ITER, DEFAULT_TOL, bethe_reference, ground_state_lanczos
from lattice import (
    BOUNDARIES,
    COUPLING_MODES,
    KINDS,
    CouplingModel,
    build_hamiltonian,
    build_lattice,
    neel_bitstring,
    product_state_energy,
    validate_bitstring,
)
from plots import plot_scatter_fit, plot_trace, read_points_csv
from vqe import resume_vqe, run_sweep, run_vqe

logger = logging.getLogger(__name__)

SOURCE_KEYS = {"vqe": "energy", "exact": "e0"}


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = os.environ.get("VQE_LOG_LEVEL", "INFO").upper()
    if verbose:
        level = "DEBUG"
    elif quiet:
        level = "WARNING"
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def _emit(data: Any, out: Optional[str] = None) -> None:
    if out:
        run_store.write_json(out, data)
        logger.info(f"💾 Wrote {out}")
    else:
        print(json.dumps(data, indent=2))


# ============================================================================
# Flag groups
# ============================================================================

def _add_lattice_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("lattice")
    group.add_argument("--config", help="TOML run config (flags override its values)")
    group.add_argument("--kind", choices=KINDS)
    group.add_argument("--n", type=int, help="sites of a chain or ring")
    group.add_argument("--rows", type=int, help="rows (ladder: rungs)")
    group.add_argument("--cols", type=int, help="columns (ladder: 2)")
    group.add_argument("--boundary", choices=BOUNDARIES)
    group.add_argument("--coupling", choices=COUPLING_MODES)
    group.add_argument("--seed", dest="coupling_seed", type=int, help="seed of random couplings")


def _add_ansatz_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("ansatz")
    group.add_argument("--ansatz", choices=FAMILIES)
    group.add_argument("--layers", type=int, help="layers p of the hamiltonian_variational ansatz")
    group.add_argument("--initial-state", dest="initial_state", help="'neel' or a bitstring (character i = site i)")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run")
    group.add_argument("--init", choices=INIT_MODES)
    group.add_argument("--init-seed", dest="init_seed", type=int)
    group.add_argument("--optimizer", choices=OPTIMIZERS)
    group.add_argument("--max-evals", dest="max_evals", type=int, help="evaluation budget (required)")
    group.add_argument("--wall-seconds", dest="wall_seconds", type=float)
    group.add_argument("--fd-step", dest="fd_step", type=float)
    group.add_argument("--gtol", type=float)
    group.add_argument("--ftol", type=float)
    group.add_argument("--initial-edge", dest="initial_edge", type=float)
    group.add_argument("--estimator", choices=ESTIMATORS)
    group.add_argument("--shots", type=int)
    group.add_argument("--sample-seed", dest="sample_seed", type=int)
    group.add_argument("--exact-baseline", dest="exact_baseline", action="store_true", default=None)
    group.add_argument("--no-opt", dest="optimize_circuit", action="store_false", default=None)
    group.add_argument("--jobs", type=int)
    group.add_argument("--output-dir", dest="output_dir")
    group.add_argument("--run-name", dest="run_name")
    group.add_argument("--record-timing", dest="record_timing", action="store_true", default=None)


_NON_CONFIG = {
    "command", "config", "n", "rows", "cols", "verbose", "quiet", "manifest", "out", "neel",
    "dump_state", "tol", "max_iter", "sizes", "handler",
}


def _config_from_args(args: argparse.Namespace) -> VqeConfig:
    flags: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    if args.n is not None:
        flags["dims"] = [args.n]
    elif args.rows is not None or args.cols is not None:
        if args.rows is None or args.cols is None:
            raise argparse.ArgumentTypeError("--rows and --cols go together")
        flags["dims"] = [args.rows, args.cols]
    return resolve_config(flags, args.config)


# ============================================================================
# Commands
# ============================================================================

def cmd_lattice(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    lattice = build_lattice(config.kind, config.dims, config.boundary)
    hamiltonian = build_hamiltonian(lattice, CouplingModel(config.coupling, config.coupling_seed))
    document = hamiltonian.to_dict()
    if args.neel:
        bits = neel_bitstring(lattice)
        document["neel"] = bits
        document["neel_energy"] = product_state_energy(hamiltonian, bits)
    _emit(document, args.out)
    return 0


def cmd_compile(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    lattice = build_lattice(config.kind, config.dims, config.boundary)
    spec = build_ansatz(config.ansatz, lattice, config.layers)
    if config.initial_state == "neel":
        initial_bits = neel_bitstring(lattice)
    else:
        initial_bits = validate_bitstring(config.initial_state, lattice.sites)
    raw = spec.circuit(initial_bits)
    stats: Dict[str, Any] = {"parameters": spec.parameter_count, "unoptimized": circuit_stats(raw)}
    circuit = raw
    if config.optimize_circuit:
        circuit = optimize_circuit(raw)
        stats["optimized"] = circuit_stats(circuit)
        unoptimized_depth = stats["unoptimized"]["depth"]
        stats["depth_ratio"] = stats["optimized"]["depth"] / unoptimized_depth if unoptimized_depth else 1.0
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as circuit_fp:
            circuit_fp.write(circuit.to_text())
        logger.info(f"💾 Wrote {args.out}")
    else:
        sys.stdout.write(circuit.to_text())
    print(json.dumps(stats, indent=2))
    return 0


def _finish_run(run, args: argparse.Namespace) -> int:
    if args.dump_state:
        run.final_state.dump(args.dump_state)
    print(json.dumps(run.summary, indent=2))
    return 0


def cmd_vqe(args: argparse.Namespace) -> int:
    return _finish_run(run_vqe(_config_from_args(args)), args)


def cmd_resume(args: argparse.Namespace) -> int:
    expected = resolve_config({}, args.config) if args.config else None
    run = resume_vqe(args.run_dir, args.extra_evals, expected=expected, wall_seconds=args.wall_seconds, jobs=args.jobs)
    return _finish_run(run, args)


def cmd_exact(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    lattice = build_lattice(config.kind, config.dims, config.boundary)
    hamiltonian = build_hamiltonian(lattice, CouplingModel(config.coupling, config.coupling_seed))
    result = ground_state_lanczos(hamiltonian, tol=args.tol, max_iter=args.max_iter)
    document = {
        "kind": lattice.kind,
        "dims": list(lattice.dims),
        "boundary": lattice.boundary,
        "coupling": config.coupling,
        **result.to_dict(),
        "bethe_reference": bethe_reference(),
    }
    _emit(document, args.out)
    return 0


def cmd_extrapolate(args: argparse.Namespace) -> int:
    summaries = run_store.load_summaries(args.summaries)
    if args.mode == "thermo":
        result = thermodynamic_extrapolation(summaries, source=SOURCE_KEYS[args.source], parity=args.parity)
        report = result.to_report()
        points = [(s["N"], s[result.source]) for s in summaries if s["N"] in result.sizes]
        fit, y_label = result.fit, "total energy"
    else:
        result = error_scaling_fit(summaries, abscissa=args.abscissa, parity=args.parity)
        report = result.to_report(predict_at=args.predict)
        transform = ABSCISSAS[args.abscissa]
        points = [(transform(n), e) for n, e in result.errors]
        fit, y_label = result.fit, "error per spin"
    if args.plot:
        x_label = "N" if args.mode == "thermo" else args.abscissa
        plot_scatter_fit(points, args.plot, fit=fit, x_label=x_label, y_label=y_label)
    _emit(report, args.out)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    if args.kind == "trace":
        if len(args.inputs) != 1:
            raise argparse.ArgumentTypeError("plot trace takes exactly one trace CSV")
        plot_trace(run_store.read_trace(args.inputs[0]), args.out, e0=args.e0, title=args.title, log_x=args.log_x)
        return 0
    if len(args.inputs) == 1 and args.inputs[0].endswith(".csv"):
        points = read_points_csv(args.inputs[0])
        x_label, y_label = "x", "y"
    else:
        key = SOURCE_KEYS[args.source]
        points = [(s["N"], s[key]) for s in run_store.load_summaries(args.inputs) if s.get(key) is not None]
        x_label, y_label = "N", key
    fit = linear_fit(points, x_label, y_label)
    plot_scatter_fit(points, args.out, fit=fit, x_label=x_label, y_label=y_label, title=args.title)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summaries = run_sweep(config, args.sizes, jobs=config.jobs)
    print(json.dumps(summaries, indent=2))
    return 0


# ============================================================================
# Parser
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heisenberg-vqe", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--manifest", action="store_true", help="print the convention/decision ledger and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("lattice", help="lattice + Hamiltonian JSON")
    _add_lattice_flags(p)
    p.add_argument("--neel", action="store_true", help="append the initial bitstring and its energy")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_lattice)

    p = sub.add_parser("compile", help="ansatz circuit text + stats")
    _add_lattice_flags(p)
    _add_ansatz_flags(p)
    p.add_argument("--no-opt", dest="optimize_circuit", action="store_false", default=None)
    p.add_argument("--out", help="write the circuit text here instead of stdout")
    p.set_defaults(handler=cmd_compile)

    p = sub.add_parser("vqe", help="run the variational loop")
    _add_lattice_flags(p)
    _add_ansatz_flags(p)
    _add_run_flags(p)
    p.add_argument("--dump-state", dest="dump_state", help="binary dump of the final state")
    p.set_defaults(handler=cmd_vqe)

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("run_dir")
    p.add_argument("--extra-evals", dest="extra_evals", type=int, required=True)
    p.add_argument("--config", help="expected run config; its digest must match the checkpoint")
    p.add_argument("--wall-seconds", dest="wall_seconds", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--dump-state", dest="dump_state")
    p.set_defaults(handler=cmd_resume)

    p = sub.add_parser("exact", help="Lanczos ground-state energy")
    _add_lattice_flags(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_exact)

    p = sub.add_parser("extrapolate", help="finite-size fits over summary files")
    p.add_argument("summaries", nargs="+", help="summary JSON files or glob patterns")
    p.add_argument("--mode", choices=("thermo", "error"), default="thermo")
    p.add_argument("--parity", choices=("all", "even", "odd"), default="all")
    p.add_argument("--abscissa", choices=("n", "logn", "invn"), default="n")
    p.add_argument("--source", choices=tuple(SOURCE_KEYS), default="vqe")
    p.add_argument("--predict", type=int, default=100, help="N at which to evaluate the error fit")
    p.add_argument("--plot", help="also write a scatter-fit SVG here")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_extrapolate)

    p = sub.add_parser("plot", help="SVG figures")
    p.add_argument("kind", choices=("trace", "scatter-fit"))
    p.add_argument("inputs", nargs="+", help="trace CSV, points CSV (x,y), or summary JSON globs")
    p.add_argument("--out", required=True)
    p.add_argument("--e0", type=float, help="ground-state reference line")
    p.add_argument("--source", choices=tuple(SOURCE_KEYS), default="vqe")
    p.add_argument("--title")
    p.add_argument("--log-x", dest="log_x", action="store_true")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("sweep", help="one run per lattice size, in parallel processes")
    _add_lattice_flags(p)
    _add_ansatz_flags(p)
    _add_run_flags(p)
    p.add_argument("--sizes", type=int, nargs="+", required=True)
    p.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose, args.quiet)

    if args.manifest:
        print(json.dumps(manifest_header(), indent=2))
        return 0
    if not args.command:
        parser.print_help()
        return 2

    try:
        return args.handler(args)
    except VqeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except argparse.ArgumentTypeError as e:
        logger.error(f"Invalid arguments: {e}")
        return 2
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return 130
    except Exception as e:
        logger.exception(f"❌ Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
