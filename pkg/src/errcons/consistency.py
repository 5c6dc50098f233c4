"""Observed/expected error overlap, kappa, analytical bounds and group CIs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .core import UNDEFINED, AlignedOutcomes, ConsistencyResult, Interval, Kappa, ObserverId
from .errors import (
    AlignmentError,
    DomainError,
    EmptyInputError,
    InsufficientDataError,
    UndefinedKappaError,
)

Z95 = 1.959964
_BRANCH_TOL = 1e-12


def _fraction(x, name="value"):
    x = float(x)
    if not 0.0 <= x <= 1.0:  # also rejects NaN
        raise DomainError(f"{name} {x!r} outside [0, 1]")
    return x


def _as_outcome_vector(v):
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise AlignmentError(f"outcome vector must be one-dimensional, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def observed_overlap(a, b) -> float:
    """Fraction of trials on which ``a`` and ``b`` are both right or both wrong."""
    a = _as_outcome_vector(a)
    b = _as_outcome_vector(b)
    if a.shape != b.shape:
        raise AlignmentError(f"outcome vectors differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise EmptyInputError("outcome vectors are empty")
    e = int(np.count_nonzero(a == b))
    return e / a.size


def expected_overlap(p_i: float, p_j: float) -> float:
    """Agreement expected from two independent observers with accuracies ``p_i``, ``p_j``."""
    p_i = _fraction(p_i, "accuracy")
    p_j = _fraction(p_j, "accuracy")
    return p_i * p_j + (1.0 - p_i) * (1.0 - p_j)


def kappa(c_obs: float, c_exp: float) -> Kappa:
    """Cohen's kappa on correct/incorrect agreement.

    Returns ``UNDEFINED`` when ``c_exp == 1``.
    """
    c_obs = _fraction(c_obs, "c_obs")
    c_exp = _fraction(c_exp, "c_exp")
    if c_exp == 1.0:
        return UNDEFINED
    return (c_obs - c_exp) / (1.0 - c_exp)


def pair_consistency(outcomes: AlignedOutcomes, i: ObserverId, j: ObserverId) -> ConsistencyResult:
    a = outcomes.row(i)
    b = outcomes.row(j)
    n = outcomes.n
    k_i = int(np.count_nonzero(a))
    k_j = int(np.count_nonzero(b))
    e = int(np.count_nonzero(a == b))
    c_obs = e / n
    c_exp = expected_overlap(k_i / n, k_j / n)
    # decided on counts: c_exp == 1 exactly when both rows are all-correct or both all-wrong
    if k_i == k_j and k_i in (0, n):
        k = UNDEFINED
    else:
        k = kappa(c_obs, c_exp)
    return ConsistencyResult((i, j), n, e, k_i, k_j, c_obs, c_exp, k)


@dataclass(frozen=True)
class PairwiseMatrix:
    observers: tuple[ObserverId, ...]
    cells: tuple[tuple[ConsistencyResult, ...], ...]

    def __getitem__(self, key) -> ConsistencyResult:
        i, j = key
        idx = self.observers.index
        return self.cells[idx(i)][idx(j)]

    def unique_pairs(self, include_self: bool = False) -> list[ConsistencyResult]:
        k = len(self.observers)
        return [self.cells[r][c] for r in range(k) for c in range(r if include_self else r + 1, k)]

    @property
    def n(self) -> int:
        return self.cells[0][0].n

    def kappa_array(self) -> np.ndarray:
        """Kappa values as floats, NaN standing in for undefined cells."""
        return np.array(
            [[math.nan if c.kappa is UNDEFINED else c.kappa for c in row] for row in self.cells]
        )


def pairwise_matrix(outcomes: AlignedOutcomes) -> PairwiseMatrix:
    """All pairwise results; each unordered pair is computed once and mirrored."""
    obs = outcomes.observers
    if len(obs) < 2:
        raise InsufficientDataError("pairwise analysis needs at least two observers")
    k = len(obs)
    cells = [[None] * k for _ in range(k)]
    for r in range(k):
        cells[r][r] = pair_consistency(outcomes, obs[r], obs[r])
    for r, c in combinations(range(k), 2):
        res = pair_consistency(outcomes, obs[r], obs[c])
        cells[r][c] = res
        cells[c][r] = res.swapped()
    return PairwiseMatrix(obs, tuple(tuple(row) for row in cells))


def _cobs_lower_branch(c_exp):
    # c_exp <= 0.5: [0, 1 - sqrt(1 - 2 c_exp)]
    return 0.0, 1.0 - math.sqrt(max(0.0, 1.0 - 2.0 * c_exp))


def _cobs_upper_branch(c_exp):
    # c_exp >= 0.5: [sqrt(2 c_exp - 1), 1]
    return math.sqrt(max(0.0, 2.0 * c_exp - 1.0)), 1.0


def bounds_cobs(c_exp: float) -> Interval:
    """Attainable range of observed overlap for a given chance agreement."""
    c_exp = _fraction(c_exp, "c_exp")
    if c_exp == 0.5:
        a, b = _cobs_lower_branch(c_exp), _cobs_upper_branch(c_exp)
        assert abs(a[0] - b[0]) <= _BRANCH_TOL and abs(a[1] - b[1]) <= _BRANCH_TOL
        return Interval(0.0, 1.0)
    lo, hi = _cobs_lower_branch(c_exp) if c_exp < 0.5 else _cobs_upper_branch(c_exp)
    return Interval(lo, hi)


def bounds_cobs_from_accuracies(p_i: float, p_j: float) -> Interval:
    """Attainable range of observed overlap for fixed accuracies."""
    p_i = _fraction(p_i, "accuracy")
    p_j = _fraction(p_j, "accuracy")
    lo, hi = abs(p_i + p_j - 1.0), 1.0 - abs(p_i - p_j)
    # the two ends meet when either accuracy is 0 or 1; rounding may cross them
    return Interval(min(lo, hi), hi)


def bounds_kappa(c_exp: float) -> Interval:
    """Attainable range of kappa for a given chance agreement (``c_exp < 1``)."""
    c_exp = _fraction(c_exp, "c_exp")
    if c_exp == 1.0:
        raise UndefinedKappaError("kappa bounds are undefined at c_exp = 1")
    d = 1.0 - c_exp
    if c_exp == 0.5:
        return Interval(-1.0, 1.0)
    if c_exp < 0.5:
        return Interval(-c_exp / d, (1.0 - math.sqrt(1.0 - 2.0 * c_exp) - c_exp) / d)
    return Interval((math.sqrt(2.0 * c_exp - 1.0) - c_exp) / d, 1.0)


def z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level {level!r} outside (0, 1)")
    if level == 0.95:
        return Z95
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def group_mean_ci(kappas: Sequence[float], level: float = 0.95) -> tuple[float, Interval]:
    """Mean and normal-approximation confidence interval of a group of kappas.

    The half width is ``z * s / sqrt(m)`` with ``s`` the sample standard
    deviation (divisor ``m - 1``). Undefined entries must be filtered out by
    the caller.
    """
    values = list(kappas)
    if any(v is UNDEFINED for v in values):
        raise InsufficientDataError("undefined kappa values must be removed before averaging")
    if len(values) < 2:
        raise InsufficientDataError(f"need at least two kappa values, got {len(values)}")
    x = np.asarray(values, dtype=float)
    if np.all(x == x[0]):
        c = float(x[0])
        return c, Interval(c, c)
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    half = z_value(level) * sd / math.sqrt(x.size)
    return mean, Interval(mean - half, mean + half)
