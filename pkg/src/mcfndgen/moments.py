"""Target moments and block correlation matrices for scenario construction.

Each randomized parameter gets the first four moments of a uniform or
triangular distribution whose support brackets the parameter's base value
D: lower end D - alpha*D, upper end D + beta*D (triangular mode at D).
Moments use the (mean, standard deviation, normalized skewness,
normalized kurtosis) convention, kurtosis being E[(X-mu)^4]/sigma^4.

Correlations are specified per family block and shared by every variable
pair in the block; unspecified blocks are zero and the diagonal is one.
A matrix that fails the Cholesky test is rejected outright: repairing it
would silently violate the requested block values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, CorrelationError
from .model import (
    DetInstance,
    FAMILY_CODES,
    ParamFamily,
    RandomizationSelection,
    flatten,
)

UNIFORM_KURTOSIS = 9.0 / 5.0
TRIANGULAR_KURTOSIS = 12.0 / 5.0


class TargetDistribution(enum.Enum):
    UNIFORM = "uniform"
    TRIANGULAR = "triangular"


@dataclass(frozen=True)
class MomentTargets:
    """Per-variable first-four-moment targets, in canonical variable order."""

    mean: np.ndarray
    std_dev: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("mean", "std_dev", "skewness", "kurtosis"):
            arr = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            if n is None:
                n = arr.shape[0]
            if arr.shape != (n,):
                raise ValueError(f"{name} must be a length-{n} vector, got shape {arr.shape}")
            arr.setflags(write=False)
            arrays[name] = arr
        if (arrays["std_dev"] <= 0).any():
            bad = int(np.argmax(arrays["std_dev"] <= 0))
            raise ValueError(f"standard deviation must be positive (variable {bad})")
        realizable = arrays["kurtosis"] >= 1.0 + arrays["skewness"] ** 2 - 1e-12
        if not realizable.all():
            bad = int(np.argmax(~realizable))
            raise ValueError(
                f"unrealizable moments at variable {bad}: kurtosis "
                f"{arrays['kurtosis'][bad]} < 1 + skewness^2"
            )
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def variable_count(self) -> int:
        return self.mean.shape[0]

    def as_matrix(self) -> np.ndarray:
        """Rows (mean, std, skew, kurt), one per variable."""
        return np.column_stack([self.mean, self.std_dev, self.skewness, self.kurtosis])


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric, unit-diagonal, positive definite correlation matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise ValueError(f"correlation matrix must be square, got shape {mat.shape}")
        if not np.array_equal(mat, mat.T):
            raise ValueError("correlation matrix must be exactly symmetric")
        if not np.array_equal(np.diag(mat), np.ones(mat.shape[0])):
            raise ValueError("correlation matrix must have a unit diagonal")
        if (np.abs(mat) > 1.0).any():
            raise ValueError("correlation entries must lie in [-1, 1]")
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            raise CorrelationError("correlation matrix is not positive definite") from None
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _check_spread(d: float, alpha: float, beta: float) -> tuple[float, float]:
    if d <= 0:
        raise ValueError(f"base value must be positive, got {d}")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if beta < 0.0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if alpha + beta == 0.0:
        raise ValueError("alpha + beta must be positive; the distribution is degenerate")
    a, b = d - alpha * d, d + beta * d
    if not a < b:
        raise ValueError(
            f"the spread around {d} vanishes at floating-point precision; variance is zero"
        )
    return a, b


def uniform_targets(d: float, alpha: float, beta: float) -> tuple[float, float, float, float]:
    """Moments of uniform(a, b) with a = d - alpha*d, b = d + beta*d."""
    a, b = _check_spread(d, alpha, beta)
    mean = (a + b) / 2.0
    std = (b - a) / math.sqrt(12.0)
    return mean, std, 0.0, UNIFORM_KURTOSIS


def triangular_targets(d: float, alpha: float, beta: float) -> tuple[float, float, float, float]:
    """Moments of triangular(a, b, mode=d) with the same support rule."""
    a, b = _check_spread(d, alpha, beta)
    c = d
    mean = (a + b + c) / 3.0
    # pairwise-difference form of a^2+b^2+c^2-ab-ac-bc, stable for tiny spreads
    q = ((a - b) ** 2 + (a - c) ** 2 + (b - c) ** 2) / 2.0
    if q == 0.0:
        raise ValueError(
            f"the spread around {d} vanishes at floating-point precision; variance is zero"
        )
    std = math.sqrt(q / 18.0)
    skew = (
        math.sqrt(2.0) * (a + b - 2 * c) * (2 * a - b - c) * (a - 2 * b + c) / (5.0 * q**1.5)
    )
    return mean, std, skew, TRIANGULAR_KURTOSIS


_TARGET_FUNCTIONS = {
    TargetDistribution.UNIFORM: uniform_targets,
    TargetDistribution.TRIANGULAR: triangular_targets,
}


def assemble_targets(
    base: DetInstance,
    selection: RandomizationSelection,
    dist: TargetDistribution,
    alpha: float,
    beta: float,
) -> MomentTargets:
    """Per-variable targets from the base values of the selected parameters."""
    values = flatten(base, selection)
    zero = np.flatnonzero(values <= 0)
    if zero.size:
        index = selection.variable_index(base)
        names = ", ".join(
            f"{index[i][0].name}{index[i][1]}" for i in zero[:8]
        ) + ("..." if zero.size > 8 else "")
        raise ConfigError(
            f"{zero.size} selected parameter(s) have nonpositive base values and "
            f"cannot be randomized multiplicatively: {names}"
        )
    fn = _TARGET_FUNCTIONS[dist]
    rows = np.array([fn(v, alpha, beta) for v in values])
    return MomentTargets(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3])


def _block_key(fam_a: ParamFamily, fam_b: ParamFamily) -> frozenset[ParamFamily]:
    return frozenset((fam_a, fam_b))


def assemble_correlation(
    base: DetInstance,
    selection: RandomizationSelection,
    block_values: Mapping[tuple[ParamFamily, ParamFamily], float],
) -> CorrelationMatrix:
    """Block-structured target correlations over the selected variables.

    ``block_values`` maps unordered family pairs (same family twice for a
    within-block value) to a correlation in (-1, 1); missing blocks are 0.
    """
    lookup: dict[frozenset[ParamFamily], float] = {}
    for (fam_a, fam_b), value in block_values.items():
        if not -1.0 < value < 1.0:
            raise ValueError(
                f"block correlation {FAMILY_CODES[fam_a]}{FAMILY_CODES[fam_b]} "
                f"must lie strictly inside (-1, 1), got {value}"
            )
        key = _block_key(fam_a, fam_b)
        if key in lookup and lookup[key] != value:
            raise ValueError(
                f"conflicting values for correlation block "
                f"{FAMILY_CODES[fam_a]}{FAMILY_CODES[fam_b]}"
            )
        lookup[key] = value

    labels = [fam for fam, _ in selection.variable_index(base)]
    n = len(labels)
    matrix = np.empty((n, n))
    fams = sorted(set(labels), key=int)
    positions = {fam: np.flatnonzero([lab == fam for lab in labels]) for fam in fams}
    for fam_a in fams:
        for fam_b in fams:
            value = lookup.get(_block_key(fam_a, fam_b), 0.0)
            matrix[np.ix_(positions[fam_a], positions[fam_b])] = value
    np.fill_diagonal(matrix, 1.0)
    try:
        return CorrelationMatrix(matrix)
    except CorrelationError:
        described = ", ".join(
            f"{FAMILY_CODES[min(key, key=int)]}{FAMILY_CODES[max(key, key=int)]}={val}"
            for key, val in sorted(lookup.items(), key=lambda kv: sorted(int(f) for f in kv[0]))
        ) or "all zero"
        raise CorrelationError(
            f"block values ({described}) yield a correlation matrix that is not "
            "positive definite; weaken the block correlations"
        ) from None
