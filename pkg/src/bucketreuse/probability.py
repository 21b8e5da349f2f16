"""Exact hypergeometric and combinatorial calculators for bucket-count design.

Window probabilities follow the CDF-difference convention: a window
(lo, hi] is open below and closed above, which is what you get from
cdf(hi) - cdf(lo). Window endpoints are resolved in rational arithmetic so
that bounds landing exactly on an integer count are never lost to float
rounding. Both conventions are pinned by the reference-table checks in the
acceptance suite; do not change them without re-validating those tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "HypergeomParams",
    "InvalidParamsError",
    "hypergeom_pmf",
    "hypergeom_mean",
    "bad_bucket_window_prob",
    "overlap_within_margin_prob",
    "min_buckets_for_smallest_experiment",
    "num_bucket_samples",
    "counting_identities_check",
]

# Overlap margins are quoted as population shares at this experiment size;
# they scale linearly with the size of the sampling experiment, so a margin
# of 0.001 always means "overlap share within +-1% of the sampling
# experiment's own share".
_REFERENCE_EXPERIMENT_SIZE = Fraction(1, 10)


class InvalidParamsError(ValueError):
    """Raised when hypergeometric parameters are out of range."""


@dataclass(frozen=True)
class HypergeomParams:
    """Parameters (population, successes, draws) of a hypergeometric law."""

    population: int
    successes: int
    draws: int

    def __post_init__(self) -> None:
        if self.population < 0:
            raise InvalidParamsError(f"population must be >= 0, got {self.population}")
        if not 0 <= self.successes <= self.population:
            raise InvalidParamsError(
                f"successes must be in [0, {self.population}], got {self.successes}"
            )
        if not 0 <= self.draws <= self.population:
            raise InvalidParamsError(
                f"draws must be in [0, {self.population}], got {self.draws}"
            )


def _support(params: HypergeomParams) -> tuple[int, int]:
    k, k_s, n = params.population, params.successes, params.draws
    return max(0, n - (k - k_s)), min(n, k_s)


def hypergeom_pmf(params: HypergeomParams, x: int) -> float:
    """P(X = x) for X ~ HypGeom(population, successes, draws).

    Zero outside the support. Evaluated in exact big-integer arithmetic and
    rounded once to float, so point masses are correct to one ulp at any
    population size (math.comb stays in the low milliseconds even at a
    million).
    """
    lo, hi = _support(params)
    if x < lo or x > hi:
        return 0.0
    k, k_s, n = params.population, params.successes, params.draws
    return float(
        Fraction(math.comb(k_s, x) * math.comb(k - k_s, n - x), math.comb(k, n))
    )


def hypergeom_mean(params: HypergeomParams) -> float:
    """Expected number of drawn successes, n * K_s / K."""
    if params.population == 0:
        return 0.0
    return params.draws * params.successes / params.population


def _halfopen_window_sum(params: HypergeomParams, lo: Fraction, hi: Fraction) -> float:
    """Sum pmf over integer counts x with lo < x <= hi.

    One exact anchor evaluation at the in-window mode, then the neighbour
    ratio recurrence outward; windows of hundreds of terms cost a single
    big-integer pmf.
    """
    support_lo, support_hi = _support(params)
    first = max(support_lo, math.floor(lo) + 1)
    last = min(support_hi, math.floor(hi))
    if last < first:
        return 0.0
    k, k_s, n = params.population, params.successes, params.draws
    mode = (n + 1) * (k_s + 1) // (k + 2)
    anchor = min(max(mode, first), last)
    anchor_val = hypergeom_pmf(params, anchor)

    terms = [anchor_val]
    value = anchor_val
    for x in range(anchor, last):  # upward: ratio pmf(x+1)/pmf(x)
        value *= (k_s - x) * (n - x) / ((x + 1) * (k - k_s - n + x + 1))
        terms.append(value)
    value = anchor_val
    for x in range(anchor, first, -1):  # downward: ratio pmf(x-1)/pmf(x)
        value *= x * (k - k_s - n + x) / ((k_s - x + 1) * (n - x + 1))
        terms.append(value)
    return min(math.fsum(terms), 1.0)


def _as_fraction(value) -> Fraction:
    # str round-trip recovers the decimal a float literal was written as,
    # so bounds like 0.0035 * 100000 == 350 stay exact.
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def bad_bucket_window_prob(
    bad_pool: int, neutral_pool: int, draws: int, center, margin
) -> float:
    """Probability the drawn bad-bucket proportion lands in (center - margin,
    center + margin].

    The draw is without replacement from bad_pool + neutral_pool buckets.
    """
    if draws > bad_pool + neutral_pool:
        raise InvalidParamsError(
            f"draws ({draws}) exceed pool size ({bad_pool + neutral_pool})"
        )
    if draws <= 0:
        raise InvalidParamsError(f"draws must be positive, got {draws}")
    params = HypergeomParams(bad_pool + neutral_pool, bad_pool, draws)
    c, m = _as_fraction(center), _as_fraction(margin)
    return _halfopen_window_sum(params, (c - m) * draws, (c + m) * draws)


def overlap_within_margin_prob(num_buckets: int, frac1, frac2, margin_pp) -> float:
    """Probability that two independently sampled experiments overlap within
    margin_pp of their expected overlap.

    The overlap is the share of the second experiment's buckets that also
    belong to the first, with expectation frac1. margin_pp is quoted as a
    population share at the reference experiment size of 10% and scales with
    frac2: margin_pp = 0.001 bounds that share within +-1 percentage point.
    """
    f1, f2, m = _as_fraction(frac1), _as_fraction(frac2), _as_fraction(margin_pp)
    if m <= 0:
        raise InvalidParamsError(f"margin_pp must be positive, got {margin_pp}")
    if not (0 < f1 <= 1 and 0 < f2 <= 1):
        raise InvalidParamsError(f"fractions must be in (0, 1], got {frac1}, {frac2}")
    k_s = round(f1 * num_buckets)
    n = round(f2 * num_buckets)
    params = HypergeomParams(num_buckets, k_s, n)
    rel_margin = m / _REFERENCE_EXPERIMENT_SIZE
    return _halfopen_window_sum(params, (f1 - rel_margin) * n, (f1 + rel_margin) * n)


def min_buckets_for_smallest_experiment(smallest_fraction) -> int:
    """Total bucket count needed so the sample of one smallest-size experiment
    can be spread proportionally into another experiment of the same size.

    The smallest experiment must itself contain ceil(1/s) buckets, and those
    buckets are a fraction s of the population.
    """
    s = _as_fraction(smallest_fraction)
    if not 0 < s <= 1:
        raise InvalidParamsError(f"fraction must be in (0, 1], got {smallest_fraction}")
    buckets_in_experiment = math.ceil(1 / s)
    return math.ceil(buckets_in_experiment / s)


def num_bucket_samples(num_buckets: int, sample_buckets: int) -> int:
    """Number of distinct bucket samples, C(B, k), exact."""
    if not 0 <= sample_buckets <= num_buckets:
        raise InvalidParamsError(
            f"sample_buckets must be in [0, {num_buckets}], got {sample_buckets}"
        )
    return math.comb(num_buckets, sample_buckets)


def counting_identities_check(num_buckets: int, sample_buckets: int) -> bool:
    """Verify C(B, k) == (B / k) * C(B - 1, k - 1) in exact integer arithmetic."""
    if not 1 <= sample_buckets <= num_buckets:
        raise InvalidParamsError(
            f"sample_buckets must be in [1, {num_buckets}], got {sample_buckets}"
        )
    lhs = sample_buckets * math.comb(num_buckets, sample_buckets)
    rhs = num_buckets * math.comb(num_buckets - 1, sample_buckets - 1)
    return lhs == rhs
