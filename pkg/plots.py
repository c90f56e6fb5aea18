"""
Figure files

Self-contained SVG figures rendered by matplotlib without a GUI backend:
optimization traces (best energy so far per evaluation) and scatter plots with
their fitted line. The plotted data is embedded as JSON in the SVG
description, and fixed hash salt plus a null date keep the output byte-stable.
"""

import csv
import json
import logging
import os
from typing import List, Optional, Sequence, Tuple

import matplotlib
from matplotlib.figure import Figure

from analysis import FitResult, linear_fit
from errors import InputError
from run_store import TraceRow

logger = logging.getLogger(__name__)

_SVG_RC = {
    "svg.hashsalt": "heisenberg-vqe",
    "svg.fonttype": "none",
    "path.simplify": False,
}
ZERO_RESIDUAL = 1e-12


def _save(figure: Figure, path: str, data: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    metadata = {"Date": None, "Description": json.dumps(data, separators=(",", ":"))}
    with matplotlib.rc_context(_SVG_RC):
        figure.savefig(path, format="svg", metadata=metadata)
    logger.info(f"💾 Wrote {path}")


def plot_trace(
    rows: Sequence[TraceRow],
    path: str,
    e0: Optional[float] = None,
    title: Optional[str] = None,
    log_x: bool = False,
) -> None:
    """
    Best energy so far against evaluation index.

    Args:
        rows: Trace rows (eval, energy, best, seconds)
        path: Output .svg path
        e0: Draw a horizontal ground-state line at this energy
        title: Figure title
        log_x: Logarithmic evaluation axis
    """
    if not rows:
        raise InputError("cannot plot an empty trace")
    evals = [int(r[0]) for r in rows]
    best = [float(r[2]) for r in rows]

    with matplotlib.rc_context(_SVG_RC):
        figure = Figure(figsize=(6.4, 4.2))
        ax = figure.add_subplot()
        ax.plot(evals, best, color="tab:blue", linewidth=1.2, label="best so far", gid="best-so-far")
        if e0 is not None:
            ax.axhline(e0, color="black", linewidth=0.8, label=f"E0 = {e0:g}", gid="ground-state")
        if log_x:
            ax.set_xscale("log")
        ax.set_xlabel("energy evaluations")
        ax.set_ylabel("energy")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right")
        figure.tight_layout()
    _save(figure, path, {"kind": "trace", "eval": evals, "best": best, "e0": e0})


def plot_scatter_fit(
    points: Sequence[Tuple[float, float]],
    path: str,
    fit: Optional[FitResult] = None,
    x_label: str = "N",
    y_label: str = "energy",
    title: Optional[str] = None,
) -> FitResult:
    """Points plus their least-squares line; the residual is annotated on the figure."""
    if fit is None:
        fit = linear_fit(points, x_label, y_label)
    xs = [float(p[0]) for p in points]
    ys = [float(p[1]) for p in points]
    lo, hi = min(xs), max(xs)
    residual_text = "residual = 0" if fit.residual <= ZERO_RESIDUAL else f"residual = {fit.residual:.3g}"

    with matplotlib.rc_context(_SVG_RC):
        figure = Figure(figsize=(6.4, 4.2))
        ax = figure.add_subplot()
        ax.scatter(xs, ys, color="tab:red", zorder=3, label="data", gid="points")
        ax.plot([lo, hi], [fit.predict(lo), fit.predict(hi)], color="black", linewidth=1.0,
                label=f"slope = {fit.slope:.6g}", gid="fit-line")
        ax.text(0.02, 0.04, residual_text, transform=ax.transAxes, gid="residual")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right")
        figure.tight_layout()
    _save(figure, path, {"kind": "scatter-fit", "x": xs, "y": ys, **fit.to_dict()})
    return fit


def read_points_csv(path: str) -> List[Tuple[float, float]]:
    """Two-column CSV with header x,y."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as points_fp:
            reader = csv.reader(points_fp)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x", "y"]:
                raise InputError(f"{path}: expected header x,y, got {header}")
            points = []
            for lineno, fields in enumerate(reader, start=2):
                if not fields:
                    continue
                if len(fields) != 2:
                    raise InputError(f"{path} line {lineno}: expected 2 columns, got {len(fields)}")
                try:
                    points.append((float(fields[0]), float(fields[1])))
                except ValueError as e:
                    raise InputError(f"{path} line {lineno}: {e}") from e
    except FileNotFoundError as e:
        raise InputError(f"points file not found: {path}") from e
    return points
