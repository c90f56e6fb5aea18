"""
Finite-size fits over run summaries

Straight-line least squares, the thermodynamic-limit estimate from total
energy versus N, and the per-spin error scaling fit with a prediction at
larger N.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from errors import InputError, InsufficientDataError
from exact import bethe_reference

logger = logging.getLogger(__name__)

PARITIES = ("all", "even", "odd")
SOURCES = ("energy", "e0")
CAVEAT = (
    "The extrapolated energy per spin is a fit, not a variational bound: "
    "it may lie below the exact thermodynamic-limit value."
)

ABSCISSAS: Dict[str, Callable[[float], float]] = {
    "n": lambda n: float(n),
    "logn": lambda n: math.log(n),
    "invn": lambda n: 1.0 / n,
}


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    count: int
    x_label: str = "x"
    y_label: str = "y"
    slope_stderr: float = 0.0
    intercept_stderr: float = 0.0

    def predict(self, x: float) -> float:
        return self.slope * x + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "count": self.count,
            "x": self.x_label,
            "y": self.y_label,
            "slope_stderr": self.slope_stderr,
            "intercept_stderr": self.intercept_stderr,
        }


def linear_fit(points: Sequence[Tuple[float, float]], x_label: str = "x", y_label: str = "y") -> FitResult:
    """
    Ordinary least squares y = slope * x + intercept.

    Points are sorted first so the result does not depend on input order.
    """
    ordered = sorted((float(x), float(y)) for x, y in points)
    if len(ordered) < 2:
        raise InsufficientDataError(f"a line needs at least 2 points, got {len(ordered)}")
    x = np.array([p[0] for p in ordered])
    y = np.array([p[1] for p in ordered])
    if np.all(x == x[0]):
        raise InsufficientDataError(f"all {len(x)} points share x = {x[0]}; the fit is degenerate")
    fit = stats.linregress(x, y)
    slope, intercept = float(fit.slope), float(fit.intercept)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    return FitResult(
        slope=slope,
        intercept=intercept,
        residual=max(residual, 0.0),
        count=len(ordered),
        x_label=x_label,
        y_label=y_label,
        slope_stderr=float(fit.stderr),
        intercept_stderr=float(getattr(fit, "intercept_stderr", 0.0)),
    )


def _parity_filter(summaries: Sequence[Mapping[str, Any]], parity: str) -> List[Mapping[str, Any]]:
    if parity not in PARITIES:
        raise InputError(f"parity must be one of {PARITIES}, got '{parity}'")
    if parity == "all":
        return list(summaries)
    remainder = 0 if parity == "even" else 1
    return [s for s in summaries if int(s["N"]) % 2 == remainder]


def _single_kind(summaries: Sequence[Mapping[str, Any]]) -> str:
    kinds = sorted({str(s.get("kind")) for s in summaries})
    if len(kinds) > 1:
        raise InputError(f"cannot fit mixed lattice kinds together: {', '.join(kinds)}")
    return kinds[0] if kinds else "ring"


def _require(summary: Mapping[str, Any], key: str, why: str) -> float:
    if summary.get(key) is None:
        where = summary.get("source_path", f"N={summary.get('N')}")
        raise InsufficientDataError(f"summary {where} has no '{key}' ({why})")
    return float(summary[key])


@dataclass(frozen=True)
class Extrapolation:
    fit: FitResult
    source: str
    parity: str
    sizes: Tuple[int, ...]
    reference: float = field(default_factory=bethe_reference)

    @property
    def estimate(self) -> float:
        return self.fit.slope

    @property
    def difference(self) -> float:
        return self.estimate - self.reference

    def to_report(self) -> Dict[str, Any]:
        return {
            "mode": "thermo",
            "source": self.source,
            "parity": self.parity,
            "sizes": list(self.sizes),
            **self.fit.to_dict(),
            "estimate_per_spin": self.estimate,
            "reference": self.reference,
            "difference": self.difference,
            "caveat": CAVEAT,
        }


def thermodynamic_extrapolation(
    summaries: Sequence[Mapping[str, Any]],
    source: str = "energy",
    parity: str = "all",
) -> Extrapolation:
    """
    Energy per spin in the thermodynamic limit as the slope of total energy vs N.

    Args:
        summaries: Run summaries (or exact-only summaries) of one lattice kind
        source: 'energy' for VQE results, 'e0' for exact ground energies
        parity: Fit all sizes, or only even / odd N

    Returns:
        Extrapolation carrying the fit and the comparison with the Bethe value
    """
    if source not in SOURCES:
        raise InputError(f"source must be one of {SOURCES}, got '{source}'")
    kind = _single_kind(summaries)
    if kind != "ring":
        logger.warning(f"⚠️ Extrapolating {kind} results; the reference value is for the infinite ring")
    selected = _parity_filter(summaries, parity)
    if source == "energy":
        sampled = [s.get("N") for s in selected if s.get("estimator") == "sampled"]
        if sampled:
            raise InputError(f"thermodynamic fits need exact-estimator energies; sampled runs at N={sampled}")
    points = [(int(s["N"]), _require(s, source, "needed for the fit")) for s in selected]
    if len(points) < 3:
        raise InsufficientDataError(f"thermodynamic extrapolation needs at least 3 sizes, got {len(points)}")
    fit = linear_fit(points, "N", source)
    result = Extrapolation(fit, source, parity, tuple(sorted(n for n, _ in points)))
    logger.info(
        f"Thermodynamic estimate {result.estimate:.6f} per spin vs {result.reference:.6f} "
        f"(difference {result.difference:.2e})"
    )
    return result


@dataclass(frozen=True)
class ErrorScaling:
    fit: FitResult
    abscissa: str
    parity: str
    errors: Tuple[Tuple[int, float], ...]
    by_parity: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def prediction(self, n: int) -> float:
        """Per-spin error the fitted line predicts at N = n."""
        return self.fit.predict(ABSCISSAS[self.abscissa](n))

    def to_report(self, predict_at: Optional[int] = None) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "mode": "error",
            "abscissa": self.abscissa,
            "parity": self.parity,
            "errors": [[n, e] for n, e in self.errors],
            **self.fit.to_dict(),
            "by_parity": self.by_parity,
        }
        if predict_at is not None:
            report["prediction"] = {"N": predict_at, "error_per_spin": self.prediction(predict_at)}
        return report


def _per_spin_errors(summaries: Sequence[Mapping[str, Any]]) -> List[Tuple[int, float]]:
    errors = []
    for s in summaries:
        n = int(s["N"])
        energy = _require(s, "energy", "error fits need the variational energy")
        e0 = _require(s, "e0", "error fits need an exact baseline")
        errors.append((n, abs(energy - e0) / n))
    return sorted(errors)


def error_scaling_fit(
    summaries: Sequence[Mapping[str, Any]],
    abscissa: str = "n",
    parity: str = "all",
) -> ErrorScaling:
    """
    Fit |E_f - E_0| / N against a transform of N (n, log n or 1/n).

    With parity 'all' the report also carries each parity's mean error and,
    where two or more sizes exist, its own fit.
    """
    if abscissa not in ABSCISSAS:
        raise InputError(f"abscissa must be one of {tuple(ABSCISSAS)}, got '{abscissa}'")
    _single_kind(summaries)
    transform = ABSCISSAS[abscissa]
    errors = _per_spin_errors(_parity_filter(summaries, parity))
    fit = linear_fit([(transform(n), e) for n, e in errors], abscissa, "error_per_spin")

    by_parity: Dict[str, Dict[str, Any]] = {}
    if parity == "all":
        for name, remainder in (("even", 0), ("odd", 1)):
            group = [(n, e) for n, e in errors if n % 2 == remainder]
            if not group:
                continue
            entry: Dict[str, Any] = {"count": len(group), "mean_error_per_spin": float(np.mean([e for _, e in group]))}
            if len({n for n, _ in group}) >= 2:
                entry["fit"] = linear_fit([(transform(n), e) for n, e in group], abscissa, "error_per_spin").to_dict()
            by_parity[name] = entry
    return ErrorScaling(fit, abscissa, parity, tuple(errors), by_parity)
