"""
Run persistence: run directories, trace CSV, checkpoints, manifests and the
run index.

Run directory layout:
    config.json      resolved VqeConfig
    manifest.json    digest, version, decision flags, seeds, timestamps
    trace.csv        eval,energy,best,seconds (one row per energy evaluation)
    checkpoint.json  params, evals, best_energy, best_params, rng, config_sha256
    summary.json     final result
"""

import csv
import glob
import json
import logging
import os
import tempfile
import threading
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from errors import InputError

logger = logging.getLogger(__name__)

RUN_INDEX_FILE = "run_index.json"
CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.json"
TRACE_FILE = "trace.csv"
CHECKPOINT_FILE = "checkpoint.json"
SUMMARY_FILE = "summary.json"
TRACE_HEADER = ("eval", "energy", "best", "seconds")
CHECKPOINT_FIELDS = ("params", "evals", "best_energy", "best_params", "rng", "config_sha256")

TraceRow = Tuple[int, float, float, float]

_LOCK = threading.Lock()


def _iso_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(value), ".17g")


def write_json(path: str, data: Any) -> None:
    """Atomic write through a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp",
        encoding="utf-8", newline="\n", delete=False,
    ) as json_fp:
        json.dump(data, json_fp, indent=2)
        json_fp.write("\n")
    os.replace(json_fp.name, path)


def read_json(path: str, what: str = "JSON file") -> Any:
    try:
        with open(path, "r", encoding="utf-8") as json_fp:
            return json.load(json_fp)
    except FileNotFoundError as e:
        raise InputError(f"{what} not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{what} {path} is not valid JSON: {e}") from e


# ============================================================================
# Trace CSV
# ============================================================================

def write_trace(path: str, rows: Iterable[TraceRow], append: bool = False) -> None:
    """Write (or append) trace rows; the header is written when the file is new."""
    new_file = not append or not os.path.exists(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w" if new_file else "a", encoding="utf-8", newline="") as trace_fp:
        writer = csv.writer(trace_fp, lineterminator="\n")
        if new_file:
            writer.writerow(TRACE_HEADER)
        for index, energy, best, seconds in rows:
            writer.writerow([int(index), format_float(energy), format_float(best), format_float(seconds)])


def read_trace(path: str) -> List[TraceRow]:
    """Parse a trace CSV; any malformed line is an InputError naming the line."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as trace_fp:
            reader = csv.reader(trace_fp)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_HEADER:
                raise InputError(f"{path}: expected header {','.join(TRACE_HEADER)}, got {header}")
            rows: List[TraceRow] = []
            for lineno, fields in enumerate(reader, start=2):
                if len(fields) != len(TRACE_HEADER):
                    raise InputError(f"{path} line {lineno}: expected 4 columns, got {len(fields)}")
                try:
                    rows.append((int(fields[0]), float(fields[1]), float(fields[2]), float(fields[3])))
                except ValueError as e:
                    raise InputError(f"{path} line {lineno}: {e}") from e
    except FileNotFoundError as e:
        raise InputError(f"trace file not found: {path}") from e
    return rows


def truncate_trace(path: str, keep: int) -> None:
    """Drop rows past the first `keep` evaluations (rows written after the last checkpoint)."""
    rows = read_trace(path)
    if len(rows) < keep:
        raise InputError(f"{path} holds {len(rows)} evaluations, checkpoint expects {keep}")
    if len(rows) > keep:
        logger.warning(f"⚠️ Dropping {len(rows) - keep} trace row(s) written after the last checkpoint")
        write_trace(path, rows[:keep])


# ============================================================================
# Checkpoints and manifests
# ============================================================================

def write_checkpoint(run_dir: str, checkpoint: Dict[str, Any]) -> None:
    write_json(os.path.join(run_dir, CHECKPOINT_FILE), checkpoint)
    logger.debug(f"💾 Checkpoint at {checkpoint['evals']} evaluations")


def read_checkpoint(run_dir: str) -> Dict[str, Any]:
    checkpoint = read_json(os.path.join(run_dir, CHECKPOINT_FILE), "checkpoint")
    if not isinstance(checkpoint, dict):
        raise InputError(f"corrupt checkpoint in {run_dir}: expected an object")
    missing = [f for f in CHECKPOINT_FIELDS if f not in checkpoint]
    if missing:
        raise InputError(f"corrupt checkpoint in {run_dir}: missing {', '.join(missing)}")
    if len(checkpoint["params"]) != len(checkpoint["best_params"]):
        raise InputError(f"corrupt checkpoint in {run_dir}: params and best_params differ in length")
    if not isinstance(checkpoint["evals"], int) or checkpoint["evals"] < 0:
        raise InputError(f"corrupt checkpoint in {run_dir}: bad evals {checkpoint['evals']!r}")
    return checkpoint


def write_manifest(run_dir: str, manifest: Dict[str, Any]) -> None:
    record = dict(manifest)
    record.setdefault("written_at", _iso_now())
    write_json(os.path.join(run_dir, MANIFEST_FILE), record)


# ============================================================================
# Run index
# ============================================================================

def _index_path(output_dir: str) -> str:
    return os.path.join(output_dir, RUN_INDEX_FILE)


def load_run_index(output_dir: str) -> List[Dict]:
    path = _index_path(output_dir)
    if not os.path.exists(path):
        return []
    try:
        with open(path, "r", encoding="utf-8") as index_fp:
            records = json.load(index_fp)
    except json.JSONDecodeError:
        logger.error(f"Run index {path} is corrupt; starting a new one")
        return []
    return records if isinstance(records, list) else []


def record_run(output_dir: str, record: Dict[str, Any]) -> None:
    """Add or replace (by run_dir) the record of a finished run."""
    record_runs(output_dir, [record])


def record_runs(output_dir: str, new_records: Sequence[Dict[str, Any]]) -> None:
    """
    Merge several run records in one read-modify-write.

    The lock only covers threads of this process; worker processes hand their
    records back to the parent, which records them here.
    """
    with _LOCK:
        records = load_run_index(output_dir)
        for record in new_records:
            existing = next((r for r in records if r.get("run_dir") == record.get("run_dir")), None)
            if existing:
                existing.update(record)
            else:
                records.append(record)
        write_json(_index_path(output_dir), records)


def load_summaries(patterns: Sequence[str]) -> List[Dict[str, Any]]:
    """Expand glob patterns (or plain paths) and load every summary JSON they name."""
    paths: List[str] = []
    for pattern in patterns:
        matched = sorted(glob.glob(pattern))
        if not matched and os.path.exists(pattern):
            matched = [pattern]
        paths.extend(matched)
    summaries = []
    for path in dict.fromkeys(paths):
        summary = read_json(path, "summary")
        if not isinstance(summary, dict):
            raise InputError(f"summary {path} is not a JSON object")
        summary.setdefault("source_path", path)
        summaries.append(summary)
    logger.info(f"📂 Loaded {len(summaries)} summary file(s)")
    return summaries
