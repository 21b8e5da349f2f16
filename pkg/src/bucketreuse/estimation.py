"""Potential-outcome populations, treatment effect estimators, exact
enumeration oracles, and the availability-dependency estimators.

The enumeration oracles literally walk every bucket sample and every
equal-split treatment assignment in rational arithmetic, so the unbiasedness
identities they check hold exactly, not approximately. They only make sense
for toy instances; the guard keeps the design space below ten million cells.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "Population",
    "SampleDraw",
    "UnknownTimeError",
    "UnequalSplitError",
    "ZeroVarianceError",
    "TooLargeError",
    "LengthMismatchError",
    "EmptySeriesError",
    "AllNAError",
    "ate_true",
    "ate_subset",
    "ate_shift",
    "diff_in_means",
    "ht_mean",
    "welch_t",
    "random_draw",
    "enumerate_unbiasedness",
    "enumerate_restricted_unbiasedness",
    "cor_star",
    "mean_cor_by_lag",
    "delta_hat",
]

_ENUMERATION_LIMIT = 10_000_000

# Equal bucket sizes make every unit's inclusion probability N_S/N, so the
# weighted mean must agree with the plain mean to float precision.
_HT_CONSISTENCY_TOL = 1e-12

DEFAULT_COR_TOLERANCE = 0.01


class UnknownTimeError(KeyError):
    """Raised for a time index outside the modeled range."""


class UnequalSplitError(ValueError):
    """Raised when a treatment assignment is not an equal split."""


class ZeroVarianceError(ValueError):
    """Raised when a t-statistic denominator degenerates."""


class TooLargeError(ValueError):
    """Raised when an exhaustive enumeration would be too big."""


class LengthMismatchError(ValueError):
    """Raised when two vectors differ in length."""


class EmptySeriesError(ValueError):
    """Raised for availability series with fewer than two days."""


class AllNAError(ValueError):
    """Raised when every lag of a series has only undefined correlations."""


@dataclass(frozen=True)
class Population:
    """Units with bucket assignments and both potential outcomes per time.

    y0 and y1 have shape (num_times, num_units); bucket_of[i] is the bucket
    index of unit i. Buckets must all have the same size.
    """

    bucket_of: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bucket_of", np.asarray(self.bucket_of, dtype=np.int64))
        object.__setattr__(self, "y0", np.atleast_2d(np.asarray(self.y0)))
        object.__setattr__(self, "y1", np.atleast_2d(np.asarray(self.y1)))
        n = len(self.bucket_of)
        if self.y0.shape != self.y1.shape or self.y0.shape[1] != n:
            raise ValueError(
                f"outcome shapes {self.y0.shape}/{self.y1.shape} do not match "
                f"{n} units"
            )
        counts = np.bincount(self.bucket_of)
        if counts.min() != counts.max():
            raise ValueError("buckets must be equally sized")

    @property
    def num_units(self) -> int:
        return len(self.bucket_of)

    @property
    def num_buckets(self) -> int:
        return int(self.bucket_of.max()) + 1

    @property
    def bucket_size(self) -> int:
        return self.num_units // self.num_buckets

    @property
    def num_times(self) -> int:
        return self.y0.shape[0]

    def check_time(self, t: int) -> int:
        if not 0 <= t < self.num_times:
            raise UnknownTimeError(f"time {t} not modeled (have {self.num_times})")
        return t

    def units_in_buckets(self, buckets: Sequence[int]) -> np.ndarray:
        mask = np.isin(self.bucket_of, np.asarray(list(buckets), dtype=np.int64))
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class SampleDraw:
    """A bucket sample with its units and an equal-split treatment vector."""

    buckets: tuple[int, ...]
    units: np.ndarray
    assignment: np.ndarray  # 1 = treatment, 0 = control

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", np.asarray(self.units, dtype=np.int64))
        object.__setattr__(self, "assignment", np.asarray(self.assignment, dtype=np.int64))
        if len(self.units) != len(self.assignment):
            raise ValueError("assignment length must match unit count")

    def require_equal_split(self) -> None:
        n = len(self.assignment)
        if n % 2 != 0 or int(self.assignment.sum()) != n // 2:
            raise UnequalSplitError(
                f"expected an equal split of {n} units, "
                f"got {int(self.assignment.sum())} treated"
            )


def ate_true(pop: Population, t: int) -> float:
    """Population average treatment effect at time t."""
    t = pop.check_time(t)
    return float(np.mean(pop.y1[t]) - np.mean(pop.y0[t]))


def ate_subset(pop: Population, buckets: Sequence[int], t: int) -> float:
    """Average treatment effect restricted to the units of a bucket subset."""
    t = pop.check_time(t)
    units = pop.units_in_buckets(buckets)
    if len(units) == 0:
        raise ValueError("bucket subset is empty")
    return float(np.mean(pop.y1[t, units]) - np.mean(pop.y0[t, units]))


def ate_shift(pop: Population, buckets: Sequence[int], t_from: int, t_to: int) -> float:
    """Change of the subset ATE between two time points, t_from < t_to."""
    if not t_from < t_to:
        raise ValueError(f"need t_from < t_to, got {t_from} >= {t_to}")
    return ate_subset(pop, buckets, t_to) - ate_subset(pop, buckets, t_from)


def diff_in_means(draw: SampleDraw, pop: Population, t: int) -> float:
    """Equal-split difference-in-means estimate on a sample."""
    t = pop.check_time(t)
    draw.require_equal_split()
    treated = draw.units[draw.assignment == 1]
    control = draw.units[draw.assignment == 0]
    n_s = len(draw.units)
    return float(
        (2.0 / n_s) * (pop.y1[t, treated].sum() - pop.y0[t, control].sum())
    )


def ht_mean(draw: SampleDraw, pop: Population, t: int, arm: int) -> float:
    """Inclusion-probability weighted mean of one arm's observed outcomes.

    With equally sized buckets every unit has inclusion probability N_S/N and
    the weighted estimator collapses to the plain arm mean; both are computed
    and cross-checked before returning.
    """
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm}")
    t = pop.check_time(t)
    draw.require_equal_split()
    arm_units = draw.units[draw.assignment == arm]
    outcomes = (pop.y1 if arm == 1 else pop.y0)[t, arm_units]
    n_s = len(draw.units)
    pi = n_s / pop.num_units
    weighted = float(n_s / (pop.num_units * (n_s / 2)) * np.sum(outcomes / pi))
    plain = float(np.mean(outcomes))
    if not math.isclose(weighted, plain, rel_tol=0.0, abs_tol=max(1.0, abs(plain)) * _HT_CONSISTENCY_TOL):
        raise AssertionError(
            f"weighted mean {weighted} diverged from plain mean {plain}"
        )
    return plain


def welch_t(draw: SampleDraw, pop: Population, t: int) -> float:
    """Welch t-statistic of the treatment/control contrast on a sample."""
    t = pop.check_time(t)
    draw.require_equal_split()
    treated = pop.y1[t, draw.units[draw.assignment == 1]]
    control = pop.y0[t, draw.units[draw.assignment == 0]]
    if len(treated) < 2 or len(control) < 2:
        raise ZeroVarianceError("each arm needs at least two units")
    v1 = float(np.var(treated, ddof=1))
    v0 = float(np.var(control, ddof=1))
    denom = math.sqrt(v1 / len(treated) + v0 / len(control))
    if denom == 0.0:
        raise ZeroVarianceError("both arms have zero variance")
    return (float(np.mean(treated)) - float(np.mean(control))) / denom


def random_draw(
    pop: Population, sample_buckets: int, rng: np.random.Generator
) -> SampleDraw:
    """Uniform bucket sample plus a uniform equal-split assignment."""
    buckets = rng.choice(pop.num_buckets, size=sample_buckets, replace=False)
    buckets.sort()
    units = pop.units_in_buckets(buckets)
    n_s = len(units)
    if n_s % 2 != 0:
        raise UnequalSplitError(f"sample of {n_s} units cannot split equally")
    assignment = np.zeros(n_s, dtype=np.int64)
    assignment[rng.choice(n_s, size=n_s // 2, replace=False)] = 1
    return SampleDraw(tuple(int(b) for b in buckets), units, assignment)


def _integer_outcomes(pop: Population, t: int) -> tuple[list[int], list[int]]:
    y0 = pop.y0[t]
    y1 = pop.y1[t]
    if not (np.all(y0 == np.round(y0)) and np.all(y1 == np.round(y1))):
        raise ValueError("exact enumeration requires integer-valued outcomes")
    return [int(v) for v in y0], [int(v) for v in y1]


def _ate_fraction(y0: list[int], y1: list[int]) -> Fraction:
    return Fraction(sum(y1) - sum(y0), len(y0))


def _enumerate_mean_over_samples(
    pop: Population,
    bucket_pools: list[tuple[int, ...]],
    sample_buckets: int,
    y0: list[int],
    y1: list[int],
) -> tuple[Fraction, int]:
    """Exact mean of the difference-in-means over every (pool, bucket sample,
    equal split). Returns (mean, number of design cells)."""
    total = 0  # integer sum of (treated y1 sum - control y0 sum)
    cells = 0
    n_s = None
    for pool in bucket_pools:
        for sample in itertools.combinations(pool, sample_buckets):
            units = pop.units_in_buckets(sample)
            n_s = len(units)
            half = n_s // 2
            unit_list = [int(u) for u in units]
            all_y0 = sum(y0[u] for u in unit_list)
            for treated in itertools.combinations(unit_list, half):
                treated_y1 = sum(y1[u] for u in treated)
                control_y0 = all_y0 - sum(y0[u] for u in treated)
                total += treated_y1 - control_y0
                cells += 1
    assert n_s is not None
    return Fraction(2 * total, n_s * cells), cells


def enumerate_unbiasedness(
    pop: Population, sample_buckets: int, t: int
) -> tuple[Fraction, Fraction]:
    """Exact mean of the difference-in-means over the full design space of
    bucket samples and equal splits, together with the exact ATE.

    The two are equal for any integer-valued population: this is the
    unbiasedness identity under unrestricted bucket sampling.
    """
    t = pop.check_time(t)
    b = pop.num_buckets
    if not 1 <= sample_buckets <= b:
        raise ValueError(f"sample_buckets must be in [1, {b}], got {sample_buckets}")
    n_s = sample_buckets * pop.bucket_size
    if n_s % 2 != 0:
        raise UnequalSplitError(f"sample of {n_s} units cannot split equally")
    size = math.comb(b, sample_buckets) * math.comb(n_s, n_s // 2)
    if size > _ENUMERATION_LIMIT:
        raise TooLargeError(f"design space has {size} cells, limit {_ENUMERATION_LIMIT}")
    y0, y1 = _integer_outcomes(pop, t)
    mean, _ = _enumerate_mean_over_samples(
        pop, [tuple(range(b))], sample_buckets, y0, y1
    )
    return mean, _ate_fraction(y0, y1)


def enumerate_restricted_unbiasedness(
    pop: Population, subset_size: int, sample_buckets: int, t: int
) -> tuple[Fraction, Fraction]:
    """Exact mean of the difference-in-means when sampling happens inside a
    uniformly drawn bucket subset of the given size, over every (subset,
    sample, equal split); plus the exact ATE.

    Equality of the two shows a random availability subset does not bias the
    estimator.
    """
    t = pop.check_time(t)
    b = pop.num_buckets
    if not 1 <= sample_buckets <= subset_size <= b:
        raise ValueError(
            f"need 1 <= sample_buckets <= subset_size <= {b}, "
            f"got {sample_buckets}, {subset_size}"
        )
    n_s = sample_buckets * pop.bucket_size
    if n_s % 2 != 0:
        raise UnequalSplitError(f"sample of {n_s} units cannot split equally")
    size = (
        math.comb(b, subset_size)
        * math.comb(subset_size, sample_buckets)
        * math.comb(n_s, n_s // 2)
    )
    if size > _ENUMERATION_LIMIT:
        raise TooLargeError(f"design space has {size} cells, limit {_ENUMERATION_LIMIT}")
    y0, y1 = _integer_outcomes(pop, t)
    pools = list(itertools.combinations(range(b), subset_size))
    mean, _ = _enumerate_mean_over_samples(pop, pools, sample_buckets, y0, y1)
    return mean, _ate_fraction(y0, y1)


def _as_binary(vector) -> np.ndarray:
    arr = np.asarray(vector)
    if arr.dtype != bool:
        values = np.unique(arr)
        if not np.all(np.isin(values, (0, 1))):
            raise ValueError("vector must be binary (0/1)")
        arr = arr.astype(bool)
    return arr


def cor_star(b1, b2) -> float | None:
    """Pearson correlation of two binary vectors with the degenerate cases
    resolved: either vector all-ones -> 0, both all-zeros -> 1, one all-zeros
    against a varying vector -> None (undefined)."""
    x = _as_binary(b1)
    y = _as_binary(b2)
    if len(x) != len(y):
        raise LengthMismatchError(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) == 0:
        raise LengthMismatchError("vectors must be non-empty")
    n = len(x)
    sx, sy = int(x.sum()), int(y.sum())
    if 0 < sx < n and 0 < sy < n:
        sxy = int(np.count_nonzero(x & y))
        num = n * sxy - sx * sy
        den = math.sqrt((n * sx - sx * sx) * (n * sy - sy * sy))
        return num / den
    if sx == n or sy == n:
        return 0.0
    if sx == 0 and sy == 0:
        return 1.0
    return None


def _series_matrix(series) -> np.ndarray:
    mat = np.asarray(series)
    if mat.ndim != 2:
        raise ValueError(f"series must be 2-d (days x buckets), got shape {mat.shape}")
    if mat.shape[0] < 2:
        raise EmptySeriesError(f"need at least 2 days, got {mat.shape[0]}")
    return mat


def mean_cor_by_lag(series) -> list[float | None]:
    """Mean cor_star between days t and t+delta, for delta = 1 .. T-1.

    Undefined terms are dropped from both the numerator and the divisor; a lag
    where every term is undefined yields None.
    """
    mat = _series_matrix(series)
    days = mat.shape[0]
    means: list[float | None] = []
    for delta in range(1, days):
        terms = [
            c
            for t in range(days - delta)
            if (c := cor_star(mat[t], mat[t + delta])) is not None
        ]
        means.append(sum(terms) / len(terms) if terms else None)
    return means


def delta_hat(series, tolerance: float = DEFAULT_COR_TOLERANCE) -> int | None:
    """Smallest lag at which the mean availability correlation is within
    tolerance of zero; None if no lag up to T-1 qualifies."""
    means = mean_cor_by_lag(series)
    if all(m is None for m in means):
        raise AllNAError("every lag has only undefined correlations")
    for delta, mean in enumerate(means, start=1):
        if mean is not None and abs(mean) <= tolerance:
            return delta
    return None
