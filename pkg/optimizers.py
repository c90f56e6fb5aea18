"""
Classical optimizers for the variational loop

BFGS with forward-difference gradients and Armijo backtracking, and an
adaptive Nelder-Mead simplex. Both return the best point they ever evaluated
and treat BudgetExhausted as a normal stop.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from errors import BudgetExhausted, InputError, OptimizerAbort

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1.49e-8
DEFAULT_GTOL = 1e-6
DEFAULT_FTOL = 1e-10
ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 40
CURVATURE_EPS = 1e-12

IterateCallback = Callable[[int, np.ndarray, float], None]


class Objective(Protocol):
    def __call__(self, x: np.ndarray) -> float: ...


@dataclass
class OptimizerOptions:
    fd_step: float = DEFAULT_FD_STEP
    gtol: float = DEFAULT_GTOL
    ftol: float = DEFAULT_FTOL
    max_iterations: Optional[int] = None
    # only enforced here for plain callables; budgeted objectives enforce their own
    max_evaluations: Optional[int] = None
    initial_edge: float = 0.1
    xatol: float = 1e-8
    fatol: float = 1e-12

    def __post_init__(self):
        if self.fd_step <= 0:
            raise InputError(f"finite-difference step must be positive, got {self.fd_step}")
        if self.initial_edge <= 0:
            raise InputError(f"initial simplex edge must be positive, got {self.initial_edge}")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    stopped: str
    history: List[float] = field(default_factory=list)


class _Tracked:
    """Counts calls, rejects non-finite values and remembers the best point."""

    def __init__(self, objective: Objective, max_evaluations: Optional[int] = None):
        self.objective = objective
        self.max_evaluations = max_evaluations
        self.nfev = 0
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf

    def _record(self, x: np.ndarray, value: float) -> float:
        value = float(value)
        if not math.isfinite(value):
            raise OptimizerAbort(f"objective returned {value} at evaluation {self.nfev}")
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=float)
        return value

    def _reserve(self, count: int) -> int:
        if self.max_evaluations is None:
            return count
        remaining = self.max_evaluations - self.nfev
        if remaining <= 0:
            raise BudgetExhausted()
        return min(count, remaining)

    def __call__(self, x: np.ndarray) -> float:
        self._reserve(1)
        value = self.objective(x)
        self.nfev += 1
        return self._record(x, value)

    def result(self, x0: np.ndarray, nit: int, stopped: str, history: List[float]) -> "OptimizeResult":
        best_x = self.best_x if self.best_x is not None else np.array(x0, dtype=float)
        return OptimizeResult(best_x, self.best_f, nit, self.nfev, stopped, history)

    def evaluate_many(self, points: Sequence[np.ndarray]) -> List[float]:
        allowed = self._reserve(len(points))
        batch = list(points[:allowed])
        many = getattr(self.objective, "evaluate_many", None)
        if many is None:
            recorded = [self(p) for p in batch]
        else:
            values = many(batch)
            self.nfev += len(values)
            recorded = [self._record(p, v) for p, v in zip(batch, values)]
        if allowed < len(points):
            raise BudgetExhausted()
        return recorded


def _evaluate_batch(objective: Objective, points: Sequence[np.ndarray]) -> List[float]:
    many = getattr(objective, "evaluate_many", None)
    if many is not None:
        return list(many(points))
    return [objective(p) for p in points]


def finite_difference_gradient(objective: Objective, x: np.ndarray, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """
    Forward differences: one evaluation at x, then one per coordinate.

    The step on coordinate i is h * max(1, |x_i|). When the objective offers
    evaluate_many, all P+1 points go out as one batch; values come back in
    index order.
    """
    return _forward_differences(objective, x, h)[0]


def _forward_differences(objective: Objective, x: np.ndarray, h: float) -> Tuple[np.ndarray, float]:
    # gradient plus the base value f(x) from the same batch
    if h <= 0:
        raise InputError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    shifted = []
    steps = np.empty(x.size)
    for i in range(x.size):
        point = x.copy()
        point[i] += h * max(1.0, abs(x[i]))
        steps[i] = point[i] - x[i]
        shifted.append(point)
    values = _evaluate_batch(objective, [x, *shifted])
    return (np.asarray(values[1:]) - values[0]) / steps, float(values[0])


def minimize_quasi_newton(
    objective: Objective,
    x0: Sequence[float],
    options: Optional[OptimizerOptions] = None,
    callback: Optional[IterateCallback] = None,
) -> OptimizeResult:
    """
    BFGS on the inverse Hessian, starting from the identity.

    Stops on gradient infinity-norm <= gtol, relative improvement <= ftol,
    a failed line search, max_iterations, or when the objective raises
    BudgetExhausted. callback(iteration, x, f) runs on every accepted iterate.
    """
    opts = options or OptimizerOptions()
    tracked = _Tracked(objective, opts.max_evaluations)
    x = np.array(x0, dtype=float)
    n = x.size
    identity = np.eye(n)
    history: List[float] = []
    nit = 0
    stopped = "max_iterations"

    try:
        g, f = _forward_differences(tracked, x, opts.fd_step)
        hinv = identity.copy()
        while True:
            if np.max(np.abs(g), initial=0.0) <= opts.gtol:
                stopped = "gtol"
                break
            if opts.max_iterations is not None and nit >= opts.max_iterations:
                break

            direction = -hinv @ g
            slope = float(g @ direction)
            if slope >= 0:
                logger.debug("BFGS direction is not a descent direction; resetting inverse Hessian")
                hinv = identity.copy()
                direction = -g
                slope = float(g @ direction)

            alpha = 1.0
            x_new = None
            for _ in range(MAX_BACKTRACKS):
                candidate = x + alpha * direction
                f_candidate = tracked(candidate)
                if f_candidate <= f + ARMIJO_C1 * alpha * slope:
                    x_new, f_new = candidate, f_candidate
                    break
                alpha *= 0.5
            if x_new is None:
                stopped = "line_search"
                break
            logger.debug(f"line search accepted alpha={alpha:g}")

            g_new = finite_difference_gradient(tracked, x_new, opts.fd_step)
            s = x_new - x
            y = g_new - g
            sy = float(s @ y)
            if sy > CURVATURE_EPS:
                rho = 1.0 / sy
                left = identity - rho * np.outer(s, y)
                hinv = left @ hinv @ left.T + rho * np.outer(s, s)

            improvement = f - f_new
            x, f, g = x_new, f_new, g_new
            nit += 1
            history.append(f)
            logger.info(f"BFGS iter {nit}: evals={tracked.nfev} energy={f:.12f} |g|={np.max(np.abs(g)):.2e}")
            if callback is not None:
                callback(nit, x, f)
            if improvement <= opts.ftol * max(1.0, abs(f)):
                stopped = "ftol"
                break
    except BudgetExhausted as e:
        stopped = e.reason

    return tracked.result(x0, nit, stopped, history)


def _simplex_coefficients(n: int):
    # (reflection, expansion, contraction, shrink); dimension-adaptive for n >= 2
    if n < 2:
        return 1.0, 2.0, 0.5, 0.5
    return 1.0, 1.0 + 2.0 / n, 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n


def minimize_gradient_free(
    objective: Objective,
    x0: Sequence[float],
    options: Optional[OptimizerOptions] = None,
    callback: Optional[IterateCallback] = None,
) -> OptimizeResult:
    """
    Nelder-Mead with dimension-adaptive coefficients.

    The initial simplex is x0 plus one vertex per axis at distance
    initial_edge. Stops when the simplex values are flat within fatol, its
    vertices lie within xatol of the best one, max_iterations is reached, or
    the budget runs out.
    """
    opts = options or OptimizerOptions()
    tracked = _Tracked(objective, opts.max_evaluations)
    x0 = np.array(x0, dtype=float)
    n = x0.size
    rho, chi, psi, sigma = _simplex_coefficients(n)
    history: List[float] = []
    nit = 0
    stopped = "max_iterations"

    try:
        simplex = np.vstack([x0, x0 + opts.initial_edge * np.eye(n)])
        values = np.asarray(tracked.evaluate_many(list(simplex)))
        while True:
            order = np.argsort(values, kind="stable")
            simplex, values = simplex[order], values[order]
            if np.max(np.abs(values[1:] - values[0]), initial=0.0) <= opts.fatol:
                stopped = "flat"
                break
            if np.max(np.abs(simplex[1:] - simplex[0]), initial=0.0) <= opts.xatol:
                stopped = "xatol"
                break
            if opts.max_iterations is not None and nit >= opts.max_iterations:
                break

            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            reflected = centroid + rho * (centroid - worst)
            f_reflected = tracked(reflected)
            shrink = False
            if f_reflected < values[0]:
                expanded = centroid + rho * chi * (centroid - worst)
                f_expanded = tracked(expanded)
                if f_expanded < f_reflected:
                    simplex[-1], values[-1] = expanded, f_expanded
                else:
                    simplex[-1], values[-1] = reflected, f_reflected
            elif f_reflected < values[-2]:
                simplex[-1], values[-1] = reflected, f_reflected
            elif f_reflected < values[-1]:
                contracted = centroid + psi * rho * (centroid - worst)
                f_contracted = tracked(contracted)
                if f_contracted <= f_reflected:
                    simplex[-1], values[-1] = contracted, f_contracted
                else:
                    shrink = True
            else:
                contracted = centroid - psi * (centroid - worst)
                f_contracted = tracked(contracted)
                if f_contracted < values[-1]:
                    simplex[-1], values[-1] = contracted, f_contracted
                else:
                    shrink = True
            if shrink:
                simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
                values[1:] = tracked.evaluate_many(list(simplex[1:]))

            nit += 1
            best = int(np.argmin(values))
            history.append(float(values[best]))
            logger.debug(f"Nelder-Mead iter {nit}: evals={tracked.nfev} best={values[best]:.12f}")
            if callback is not None:
                callback(nit, simplex[best].copy(), float(values[best]))
    except BudgetExhausted as e:
        stopped = e.reason

    logger.info(f"Nelder-Mead stopped ({stopped}) after {nit} iterations, {tracked.nfev} evals")
    return tracked.result(x0, nit, stopped, history)
