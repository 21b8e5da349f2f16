"""Deterministic salted hashing of unit ids into buckets.

Unit ids and salts are opaque byte strings (str inputs are encoded UTF-8).
The id and salt are joined with a 0x1F separator byte before hashing so that
("ab", "c") and ("a", "bc") never collide, then reduced modulo the bucket
count. The hash is xxh64 with seed 0; the identifier below is recorded in run
metadata so results stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import xxhash
from scipy.stats import chi2

__all__ = [
    "HASH_FUNCTION_ID",
    "BucketingConfig",
    "UniformityReport",
    "TooFewIdsError",
    "PathCountOverflowError",
    "hash64",
    "hash_to_bucket",
    "uniformity_report",
    "path_count_nonexclusive",
]

HASH_FUNCTION_ID = "xxh64"

_SEPARATOR = b"\x1f"

# 2**62 paths already exceed any plausible program; larger exponents signal
# a unit-count/experiment-count mix-up upstream.
_MAX_PATH_EXPONENT = 62


class TooFewIdsError(ValueError):
    """Raised when an id corpus is too small for a chi-square diagnostic."""


class PathCountOverflowError(OverflowError):
    """Raised when a path count would exceed 2**62."""


def _as_bytes(value: bytes | str) -> bytes:
    if isinstance(value, str):
        return value.encode("utf-8")
    return bytes(value)


@dataclass(frozen=True)
class BucketingConfig:
    """Number of buckets and the salt shared by one experimentation program."""

    num_buckets: int
    salt: bytes | str = b""

    def __post_init__(self) -> None:
        if self.num_buckets < 1:
            raise ValueError(f"num_buckets must be >= 1, got {self.num_buckets}")

    @property
    def salt_bytes(self) -> bytes:
        return _as_bytes(self.salt)


def hash64(unit_id: bytes | str, salt: bytes | str = b"") -> int:
    """64-bit hash of id bytes + 0x1F + salt bytes."""
    data = _as_bytes(unit_id)
    if not data:
        raise ValueError("unit id must be non-empty")
    return xxhash.xxh64_intdigest(data + _SEPARATOR + _as_bytes(salt))


def hash_to_bucket(unit_id: bytes | str, cfg: BucketingConfig) -> int:
    """Deterministic bucket index in [0, num_buckets) for a unit id."""
    return hash64(unit_id, cfg.salt_bytes) % cfg.num_buckets


@dataclass(frozen=True)
class UniformityReport:
    """Chi-square goodness-of-fit of observed bucket counts against uniform."""

    counts: np.ndarray
    chi_square: float
    p_value: float


def uniformity_report(
    ids: Iterable[bytes | str], cfg: BucketingConfig
) -> UniformityReport:
    """Bucket the ids and test the counts against the uniform expectation.

    Requires at least 10 ids per bucket so the chi-square approximation is
    usable.
    """
    counts = np.zeros(cfg.num_buckets, dtype=np.int64)
    total = 0
    for unit_id in ids:
        counts[hash_to_bucket(unit_id, cfg)] += 1
        total += 1
    if total < 10 * cfg.num_buckets:
        raise TooFewIdsError(
            f"need at least {10 * cfg.num_buckets} ids for {cfg.num_buckets} "
            f"buckets, got {total}"
        )
    if cfg.num_buckets == 1:
        return UniformityReport(counts=counts, chi_square=0.0, p_value=1.0)
    expected = total / cfg.num_buckets
    stat = float(np.sum((counts - expected) ** 2) / expected)
    p_value = float(chi2.sf(stat, df=cfg.num_buckets - 1))
    return UniformityReport(counts=counts, chi_square=stat, p_value=p_value)


def bucket_many(
    ids: Sequence[bytes | str], cfg: BucketingConfig
) -> np.ndarray:
    """Vectorized-output convenience: bucket index per id, in input order."""
    return np.fromiter(
        (hash_to_bucket(unit_id, cfg) for unit_id in ids),
        dtype=np.int64,
        count=len(ids),
    )


def path_count_nonexclusive(num_experiments: int) -> int:
    """Number of experiment-membership paths a unit can take when experiments
    never exclude each other: 2 ** num_experiments."""
    if num_experiments < 0:
        raise ValueError(f"num_experiments must be >= 0, got {num_experiments}")
    if num_experiments > _MAX_PATH_EXPONENT:
        raise PathCountOverflowError(
            f"num_experiments must be <= {_MAX_PATH_EXPONENT}, got {num_experiments}"
        )
    return 1 << num_experiments
