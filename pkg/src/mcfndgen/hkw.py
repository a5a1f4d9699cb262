"""Scenario matrix construction by iterated moment and correlation fitting.

Starting from (quasi-)random values, the engine alternates two exact
linear-algebra/rootfinding steps until every variable's first four
moments and every pairwise correlation sit within tolerance:

* a Cholesky factor transformation ``X <- L_target L_current^-1 X`` that
  imposes the target correlation matrix exactly but disturbs the third
  and fourth marginal moments, and
* a per-row cubic transformation ``Y = a + bX + cX^2 + dX^3`` whose
  coefficients are found by damped Newton iteration so that Y's raw
  moments hit the standardized targets (0, 1, skewness, kurtosis), which
  in turn disturbs correlations slightly.

Work happens on standardized rows (weighted mean 0, variance 1); the
matching tolerances are therefore variance-1-scale quantities.  If an
attempt fails to converge within the iteration budget, a fresh start is
drawn, up to the trial budget.  Successful output rows are mapped back to
``mean + std * row``.

Everything here is deterministic given (targets, correlation, options,
probabilities, seed, stream).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, RankError, TransformFailure
from .model import ScenarioMatrix
from .moments import CorrelationMatrix, MomentTargets
from .prng import Pcg32

DEFAULT_MOMENT_TOL = 1e-3
DEFAULT_CORR_TOL = 1e-3
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_MAX_TRIALS = 10

_NEWTON_MAX_STEPS = 50
_NEWTON_MAX_HALVINGS = 20
_NEWTON_RESIDUAL_TOL = 1e-12
# deterministic fallback starting points for the cubic coefficient search
_NEWTON_RESTARTS = (
    (0.0, 0.9, 0.05, -0.05),
    (0.1, 1.1, -0.1, 0.02),
    (-0.1, 0.8, 0.1, 0.05),
    (0.05, 1.2, -0.05, -0.02),
    (-0.05, 0.7, 0.15, 0.1),
)


@dataclass(frozen=True)
class HkwOptions:
    """Budgets and tolerances for scenario construction."""

    scenario_count: int
    moment_tol: float = DEFAULT_MOMENT_TOL
    corr_tol: float = DEFAULT_CORR_TOL
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_trials: int = DEFAULT_MAX_TRIALS
    verbosity: int = 0
    start_matrix: Optional[ScenarioMatrix] = None

    def __post_init__(self):
        if self.scenario_count < 1:
            raise ValueError(f"scenario count must be positive, got {self.scenario_count}")
        if self.moment_tol <= 0 or self.corr_tol <= 0:
            raise ValueError("matching tolerances must be positive")
        if self.max_iterations < 1 or self.max_trials < 1:
            raise ValueError("iteration and trial budgets must be positive")


def _weighted_mean_std(row: np.ndarray, probs: np.ndarray) -> tuple[float, float]:
    mean = float(probs @ row)
    var = float(probs @ (row - mean) ** 2)
    return mean, var


def standardize(row: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Shift and scale a row to weighted mean 0, variance 1."""
    row = np.asarray(row, dtype=float)
    mean, var = _weighted_mean_std(row, probs)
    if var <= 0.0:
        raise ValueError("cannot standardize a row with zero weighted variance")
    out = (row - mean) / np.sqrt(var)
    # second pass cleans the residual rounding error
    mean, var = _weighted_mean_std(out, probs)
    return (out - mean) / np.sqrt(var)


def raw_moments(row: np.ndarray, probs: np.ndarray, max_order: int) -> np.ndarray:
    """Probability-weighted power sums m_q = sum_t p_t row_t^q, q = 1..max_order."""
    if not 1 <= max_order <= 12:
        raise ValueError(f"max_order must be in [1, 12], got {max_order}")
    row = np.asarray(row, dtype=float)
    out = np.empty(max_order)
    power = np.ones_like(row)
    for q in range(max_order):
        power = power * row
        out[q] = probs @ power
    return out


def _cubic_residual_jacobian(
    coeffs: np.ndarray, powers: np.ndarray, probs: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the four raw-moment equations of Y = a+bX+cX^2+dX^3 and its Jacobian."""
    y = coeffs @ powers
    y2 = y * y
    y3 = y2 * y
    residual = np.array(
        [
            probs @ y - targets[0],
            probs @ y2 - targets[1],
            probs @ y3 - targets[2],
            probs @ (y3 * y) - targets[3],
        ]
    )
    # d m_q / d coeff_j = q * E[Y^(q-1) X^j]
    weighted = np.vstack([probs, probs * y, probs * y2, probs * y3])
    jacobian = (weighted @ powers.T) * np.arange(1.0, 5.0)[:, None]
    return residual, jacobian


def _minimize_cubic_residual(
    powers: np.ndarray, probs: np.ndarray, targets: np.ndarray, start: np.ndarray
) -> tuple[np.ndarray, float]:
    """Drive the moment equations toward zero from one starting point.

    Newton steps with a Levenberg-style diagonal shift as damping: the
    shift starts negligible (a plain Newton step) and grows whenever the
    step fails to reduce the residual.  Returns the best coefficients
    found and their max-abs residual; for reachable targets that residual
    is at rounding level, otherwise it is the equation system's local
    least-squares floor.
    """
    coeffs = start.copy()
    residual, jacobian = _cubic_residual_jacobian(coeffs, powers, probs, targets)
    norm2 = float(residual @ residual)
    shift = 1e-12
    for _ in range(_NEWTON_MAX_STEPS):
        if np.max(np.abs(residual)) <= _NEWTON_RESIDUAL_TOL:
            break
        gram = jacobian.T @ jacobian
        gradient = jacobian.T @ residual
        if np.max(np.abs(gradient)) < 1e-16:
            break
        improved = False
        for _ in range(_NEWTON_MAX_HALVINGS):
            damping = shift * np.diag(np.maximum(np.diag(gram), 1e-12))
            try:
                step = np.linalg.solve(gram + damping, -gradient)
            except np.linalg.LinAlgError:
                shift = max(shift * 10.0, 1e-8)
                continue
            candidate = coeffs + step
            cand_res, cand_jac = _cubic_residual_jacobian(candidate, powers, probs, targets)
            cand_norm2 = float(cand_res @ cand_res)
            if np.isfinite(cand_norm2) and cand_norm2 < norm2:
                coeffs, residual, jacobian, norm2 = candidate, cand_res, cand_jac, cand_norm2
                shift = max(shift * 0.25, 1e-12)
                improved = True
                break
            shift *= 4.0
        if not improved:
            break
    return coeffs, float(np.max(np.abs(residual)))


def _fit_cubic(
    row: np.ndarray, probs: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, float]:
    """Best cubic image of ``row``; re-tries alternate starts until exact."""
    powers = np.vstack([np.ones_like(row), row, row * row, row * row * row])
    best_row, best_res = None, np.inf
    starts = (np.array([0.0, 1.0, 0.0, 0.0]),) + tuple(np.array(s) for s in _NEWTON_RESTARTS)
    for start in starts:
        coeffs, res = _minimize_cubic_residual(powers, probs, targets, start)
        if res < best_res:
            best_row, best_res = coeffs @ powers, res
        if best_res <= _NEWTON_RESIDUAL_TOL:
            break
    return best_row, best_res


def cubic_transform(
    row: np.ndarray, probs: np.ndarray, std_targets: tuple[float, float, float, float]
) -> np.ndarray:
    """Map a standardized row through the cubic that hits the target moments.

    ``std_targets`` are raw moments on the standardized scale
    (0, 1, skewness, kurtosis); they must be realizable, i.e.
    kurtosis >= 1 + skewness^2.  Raises :class:`TransformFailure` when no
    cubic of the row attains them, which happens for rows whose shape is
    too far from the targets (a nearly Gaussian row cannot be pushed to
    a markedly sub-Gaussian kurtosis in one transform).
    """
    targets = np.asarray(std_targets, dtype=float)
    if targets[3] < 1.0 + targets[2] ** 2 - 1e-12:
        raise ValueError(
            f"unrealizable moment targets: kurtosis {targets[3]} < 1 + skewness^2"
        )
    row = np.asarray(row, dtype=float)
    out, res = _fit_cubic(row, probs, targets)
    if res > _NEWTON_RESIDUAL_TOL:
        raise TransformFailure(
            f"cubic transform failed to reach targets {tuple(targets)}; "
            f"best residual {res:.3e}"
        )
    return out


def impose_correlation(
    x: np.ndarray, probs: np.ndarray, r_target: CorrelationMatrix
) -> np.ndarray:
    """Left-multiply by L_target L_current^-1 to hit the target correlation.

    Rows keep their (zero) means; variances are rescaled to one afterward.
    """
    x = np.asarray(x, dtype=float)
    current = _weighted_correlation(x, probs)
    try:
        l_current = np.linalg.cholesky(current)
    except np.linalg.LinAlgError:
        raise TransformFailure("current scenario correlation matrix is singular") from None
    l_target = np.linalg.cholesky(r_target.matrix)
    out = l_target @ scipy.linalg.solve_triangular(l_current, x, lower=True)
    means = out @ probs
    var = ((out - means[:, None]) ** 2) @ probs
    return out / np.sqrt(var)[:, None]


def _weighted_correlation(x: np.ndarray, probs: np.ndarray) -> np.ndarray:
    means = x @ probs
    centered = x - means[:, None]
    cov = (centered * probs) @ centered.T
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return corr


def match_errors(
    x: np.ndarray,
    probs: np.ndarray,
    targets: MomentTargets,
    r_target: CorrelationMatrix,
) -> tuple[float, float]:
    """Worst moment and correlation deviations, on the variance-1 scale.

    Mean and standard deviation errors are divided by the target standard
    deviation so the same thresholds apply to standardized working rows
    and to de-standardized output.
    """
    x = np.asarray(x, dtype=float)
    means = x @ probs
    centered = x - means[:, None]
    var = (centered**2) @ probs
    sd = np.sqrt(var)
    skew = ((centered**3) @ probs) / sd**3
    kurt = ((centered**4) @ probs) / var**2
    moment_error = np.max(
        np.stack(
            [
                np.abs(means - targets.mean) / targets.std_dev,
                np.abs(sd - targets.std_dev) / targets.std_dev,
                np.abs(skew - targets.skewness),
                np.abs(kurt - targets.kurtosis),
            ]
        )
    )
    if x.shape[0] == 1:
        return float(moment_error), 0.0
    corr = _weighted_correlation(x, probs)
    mask = ~np.eye(x.shape[0], dtype=bool)
    corr_error = np.max(np.abs(corr - r_target.matrix)[mask])
    return float(moment_error), float(corr_error)


def generate_scenarios(
    targets: MomentTargets,
    corr: CorrelationMatrix,
    opts: HkwOptions,
    rng: Pcg32,
    probs: Optional[np.ndarray] = None,
) -> ScenarioMatrix:
    """Construct a scenario matrix matching the targets within tolerance."""
    n = targets.variable_count
    s = opts.scenario_count
    if corr.size != n:
        raise ValueError(
            f"correlation matrix size {corr.size} does not match {n} variables"
        )
    if s <= n:
        raise RankError(
            f"{s} scenarios cannot carry a full-rank correlation over {n} variables; "
            f"at least {n + 1} are required"
        )
    if probs is None:
        probs = np.full(s, 1.0 / s)
    else:
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (s,):
            raise ValueError(f"expected {s} probabilities, got shape {probs.shape}")
        if (probs <= 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be positive and sum to 1")

    std_targets = MomentTargets(
        np.zeros(n), np.ones(n), targets.skewness, targets.kurtosis
    )
    raw_targets = np.column_stack(
        [np.zeros(n), np.ones(n), targets.skewness, targets.kurtosis]
    )

    best = (np.inf, np.inf)
    for trial in range(opts.max_trials):
        try:
            if trial == 0 and opts.start_matrix is not None:
                start = opts.start_matrix.values
                if start.shape != (n, s):
                    raise ValueError(
                        f"start matrix has shape {start.shape}, expected {(n, s)}"
                    )
                x = np.vstack([standardize(start[i], probs) for i in range(n)])
            else:
                x = rng.normal_array(n * s).reshape(n, s)
                x = np.vstack([standardize(x[i], probs) for i in range(n)])
            # univariate stage: give every row its target moment shape before
            # the correlation fitting starts, as close as a cubic allows
            x = np.vstack([_fit_cubic(x[i], probs, raw_targets[i])[0] for i in range(n)])
        except ValueError as exc:
            if opts.verbosity >= 1:
                print(f"trial {trial + 1}: unusable start ({exc})")
            continue

        try:
            for iteration in range(opts.max_iterations):
                x = impose_correlation(x, probs, corr)
                # best-effort moment fit: early iterations may sit above the
                # targets' reach, which later iterations then open up
                x = np.vstack(
                    [_fit_cubic(x[i], probs, raw_targets[i])[0] for i in range(n)]
                )
                moment_err, corr_err = match_errors(x, probs, std_targets, corr)
                best = min(best, (moment_err, corr_err))
                if opts.verbosity >= 2:
                    print(
                        f"trial {trial + 1} iteration {iteration + 1}: "
                        f"moment error {moment_err:.3e}, correlation error {corr_err:.3e}"
                    )
                if moment_err <= opts.moment_tol and corr_err <= opts.corr_tol:
                    if opts.verbosity >= 1:
                        print(
                            f"converged in trial {trial + 1} after {iteration + 1} "
                            f"iteration(s): moment error {moment_err:.3e}, "
                            f"correlation error {corr_err:.3e}"
                        )
                    values = targets.mean[:, None] + targets.std_dev[:, None] * x
                    return ScenarioMatrix(values, probs)
        except TransformFailure as exc:
            if opts.verbosity >= 1:
                print(f"trial {trial + 1} failed: {exc}")
            continue
        if opts.verbosity >= 1:
            print(f"trial {trial + 1} exhausted {opts.max_iterations} iterations")

    raise ConvergenceError(
        f"no scenario set matched the targets after {opts.max_trials} trial(s); "
        f"best moment error {best[0]:.3e}, best correlation error {best[1]:.3e}",
        best_moment_error=best[0],
        best_corr_error=best[1],
    )
