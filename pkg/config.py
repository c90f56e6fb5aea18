"""
Run configuration

Values resolve in order: command-line flags, then the run's TOML file, then
environment defaults (VQE_OUTPUT_DIR, VQE_JOBS). load_dotenv() in the entry
point makes a local .env file part of the environment.
"""

import hashlib
import json
import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

from ansatz import FAMILIES, INIT_MODES
from errors import InputError
from lattice import BOUNDARIES, COUPLING_MODES, KINDS
from optimizers import DEFAULT_FD_STEP, DEFAULT_FTOL, DEFAULT_GTOL

logger = logging.getLogger(__name__)

VERSION = "0.3.0"
DEFAULT_OUTPUT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
OPTIMIZERS = ("quasi_newton", "gradient_free")
ESTIMATORS = ("exact", "sampled")

# fields that may change between a run and its resume without changing the problem
DIGEST_EXCLUDED = ("max_evals", "wall_seconds", "jobs", "output_dir", "run_name", "record_timing")

# [table] key -> field name, for the keys that read better inside a table
_TABLE_ALIASES = {
    "ansatz": {"family": "ansatz"},
    "optimizer": {"method": "optimizer"},
    "estimator": {"mode": "estimator", "seed": "sample_seed"},
    "lattice": {"seed": "coupling_seed"},
}

DECISION_FLAGS = {
    "qubit_order": "little-endian: qubit 0 is the least significant index bit",
    "z_eigenvalue": "|0> has sigma^z eigenvalue +1",
    "rotation": "Ra(phi) = exp(-i phi sigma^a / 2)",
    "basis_change_x": "RY- before, RY+ after",
    "basis_change_y": "RX+ before, RX- after",
    "cnot_ladder_target": "highest site of the term",
    "rz_multiplier": 2,
    "site_indexing_2d": "row-major, site = row * cols + col",
    "triangular_diagonal": "(r,c)-(r+1,c+1)",
    "neel_polarity": "color class containing site 0 holds bit 1",
    "frustrated_initial_state": "first ceil(N/2) sites hold bit 1",
    "random_couplings": "per (bond, axis), 1 - u with u ~ U[0,1), Philox",
    "xy_order": "U_kl block then U_lk block; l = N-1..1, k = N..l+1",
    "two_body_axis_order": "xx,xy,xz,yx,yy,yz,zx,zy,zz",
    "hva_bond_order": "k = 1..N per layer, axes x,y,z per bond",
    "random_init": "uniform on (0, 2 pi), Philox",
    "gradient": "forward differences, P+1 evaluations, step h*max(1,|x_i|)",
    "quasi_newton": "BFGS + Armijo backtracking (stands in for SLSQP)",
    "gradient_free": "adaptive Nelder-Mead (stands in for COBYLA)",
    "resume": "parameters only; fresh inverse Hessian",
    "sampling": "global X/Y/Z settings, shots split over active settings, remainder to Z",
    "lanczos": "full reorthogonalization, thick restart, explicit residual",
}


@dataclass(frozen=True)
class VqeConfig:
    kind: str = "ring"
    dims: Tuple[int, ...] = (4,)
    boundary: Optional[str] = None
    coupling: str = "isotropic"
    coupling_seed: Optional[int] = None
    ansatz: str = "xy"
    layers: int = 1
    initial_state: str = "neel"
    init: str = "zeros"
    init_seed: Optional[int] = None
    optimizer: str = "quasi_newton"
    fd_step: float = DEFAULT_FD_STEP
    gtol: float = DEFAULT_GTOL
    ftol: float = DEFAULT_FTOL
    initial_edge: float = 0.1
    xatol: float = 1e-8
    fatol: float = 1e-12
    max_evals: Optional[int] = None
    wall_seconds: Optional[float] = None
    estimator: str = "exact"
    shots: Optional[int] = None
    sample_seed: Optional[int] = None
    exact_baseline: bool = False
    optimize_circuit: bool = True
    jobs: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR
    run_name: Optional[str] = None
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        _choice("kind", self.kind, KINDS)
        if self.boundary is not None:
            _choice("boundary", self.boundary, BOUNDARIES)
        _choice("coupling", self.coupling, COUPLING_MODES)
        if self.coupling == "random" and self.coupling_seed is None:
            raise InputError("config field 'coupling_seed' is required for random couplings")
        _choice("ansatz", self.ansatz, FAMILIES)
        if self.layers < 1:
            raise InputError(f"config field 'layers' must be >= 1, got {self.layers}")
        if self.initial_state != "neel" and (not self.initial_state or set(self.initial_state) - {"0", "1"}):
            raise InputError(f"config field 'initial_state' must be 'neel' or a bitstring, got '{self.initial_state}'")
        _choice("init", self.init, INIT_MODES)
        if self.init == "random" and self.init_seed is None:
            raise InputError("config field 'init_seed' is required for random initialization")
        _choice("optimizer", self.optimizer, OPTIMIZERS)
        for name in ("fd_step", "gtol", "ftol", "initial_edge", "xatol", "fatol"):
            if getattr(self, name) <= 0:
                raise InputError(f"config field '{name}' must be positive, got {getattr(self, name)}")
        if self.max_evals is not None and self.max_evals < 1:
            raise InputError(f"config field 'max_evals' must be >= 1, got {self.max_evals}")
        if self.wall_seconds is not None and self.wall_seconds <= 0:
            raise InputError(f"config field 'wall_seconds' must be positive, got {self.wall_seconds}")
        _choice("estimator", self.estimator, ESTIMATORS)
        if self.estimator == "sampled":
            if self.shots is None or self.shots < 1:
                raise InputError("config field 'shots' must be >= 1 for the sampled estimator")
            if self.sample_seed is None:
                raise InputError("config field 'sample_seed' is required for the sampled estimator")
        if self.jobs < 1:
            raise InputError(f"config field 'jobs' must be >= 1, got {self.jobs}")

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "VqeConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InputError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(**values)
        except InputError:
            raise
        except (TypeError, ValueError) as e:
            raise InputError(f"malformed config: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["dims"] = list(self.dims)
        return data

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the problem-defining fields."""
        payload = {k: v for k, v in self.to_dict().items() if k not in DIGEST_EXCLUDED}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_dir(self) -> str:
        return os.path.join(self.output_dir, self.run_name or f"run-{self.digest()[:12]}")


def _choice(name: str, value: Any, allowed: Tuple[str, ...]) -> None:
    if value not in allowed:
        raise InputError(f"config field '{name}' must be one of {allowed}, got '{value}'")


def env_defaults() -> Dict[str, Any]:
    """Environment-level defaults; the lowest-priority layer."""
    defaults: Dict[str, Any] = {"output_dir": os.environ.get("VQE_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR}
    jobs = os.environ.get("VQE_JOBS")
    if jobs:
        try:
            defaults["jobs"] = int(jobs)
        except ValueError as e:
            raise InputError(f"VQE_JOBS must be an integer, got '{jobs}'") from e
    return defaults


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read a TOML run config and flatten its tables.

    Returns:
        Flat {field: value} mapping; field names are validated later
    """
    try:
        with open(path, "rb") as config_fp:
            document = tomllib.load(config_fp)
    except FileNotFoundError as e:
        raise InputError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        # message carries "(at line L, column C)"
        raise InputError(f"{path}: {e}") from e

    flat: Dict[str, Any] = {}
    for key, value in document.items():
        if isinstance(value, dict):
            aliases = _TABLE_ALIASES.get(key)
            if aliases is None:
                raise InputError(f"{path}: unknown config table [{key}]")
            for inner, inner_value in value.items():
                flat[aliases.get(inner, inner)] = inner_value
        else:
            flat[key] = value
    logger.debug(f"📂 Loaded {len(flat)} config field(s) from {path}")
    return flat


def resolve_config(flags: Optional[Mapping[str, Any]] = None, path: Optional[str] = None) -> VqeConfig:
    """
    Merge the three configuration layers into a validated VqeConfig.

    Priority:
    1. Command-line flags (None means "not given")
    2. Config file values
    3. Environment defaults
    """
    merged = env_defaults()
    if path:
        merged.update(load_config_file(path))
    if flags:
        merged.update({k: v for k, v in flags.items() if v is not None})
    return VqeConfig.from_dict(merged)


def manifest_header() -> Dict[str, Any]:
    return {"version": VERSION, "decision_flags": dict(DECISION_FLAGS)}
