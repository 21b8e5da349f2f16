"""Discrete-day state of an exclusive experiment program.

One ProgramState tracks which buckets are occupied by active experiments.
Within a day all stops happen before all starts, so buckets freed by an
expiring experiment are available to experiments sampled the same day.
Multiple programs over the same buckets are just independent ProgramState
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "Experiment",
    "ProgramState",
    "FractionTooSmallError",
    "InsufficientBucketsError",
    "buckets_for_fraction",
    "sample_nonexclusive",
    "start_experiment",
    "advance_day",
    "snapshot",
    "export_state",
    "encode_rle",
    "decode_rle",
]


class FractionTooSmallError(ValueError):
    """Raised when a sample fraction rounds to zero buckets."""


class InsufficientBucketsError(RuntimeError):
    """Raised when a start needs more buckets than are available."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def buckets_for_fraction(fraction, num_buckets: int) -> int:
    """Bucket count whose population share comes closest to `fraction`,
    rounding halves up. Exact rational arithmetic, so 0.001 of 1000 buckets
    is exactly 1."""
    f = _as_fraction(fraction)
    if not 0 < f <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = math.floor(f * num_buckets + Fraction(1, 2))
    if k == 0:
        raise FractionTooSmallError(
            f"fraction {fraction} rounds to zero of {num_buckets} buckets"
        )
    return k


@dataclass
class Experiment:
    """A scheduled draw of buckets, occupied from start_day through end_day."""

    id: str
    size_fraction: float
    num_buckets: int
    length_days: int
    start_day: int
    buckets: np.ndarray  # sorted bucket indices
    program: str = "default"

    def __post_init__(self) -> None:
        if self.length_days < 1:
            raise ValueError(f"length_days must be >= 1, got {self.length_days}")
        self.buckets = np.asarray(self.buckets, dtype=np.int64)
        if len(self.buckets) != self.num_buckets:
            raise ValueError(
                f"expected {self.num_buckets} buckets, got {len(self.buckets)}"
            )

    @property
    def end_day(self) -> int:
        return self.start_day + self.length_days - 1

    def bucket_set(self) -> frozenset[int]:
        return frozenset(int(b) for b in self.buckets)


@dataclass
class ProgramState:
    """Mutable state of one exclusive program: day clock, active experiments,
    and the availability vector they imply."""

    num_buckets: int
    program: str = "default"
    seed: int | None = None
    clock: int = 1
    active: list[Experiment] = field(default_factory=list)
    availability: np.ndarray = field(init=False)
    _next_id: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if self.num_buckets < 1:
            raise ValueError(f"num_buckets must be >= 1, got {self.num_buckets}")
        self.availability = np.ones(self.num_buckets, dtype=bool)

    @property
    def available_count(self) -> int:
        return int(self.availability.sum())

    @property
    def occupied_fraction(self) -> float:
        return 1.0 - self.available_count / self.num_buckets

    def fresh_id(self) -> str:
        self._next_id += 1
        return f"{self.program}-exp{self._next_id}"


def sample_nonexclusive(num_buckets: int, size_fraction, rng: np.random.Generator) -> set[int]:
    """Uniform without-replacement bucket draw from all buckets, ignoring any
    program's availability (non-exclusive experiments sample the full
    population)."""
    k = buckets_for_fraction(size_fraction, num_buckets)
    drawn = rng.choice(num_buckets, size=k, replace=False)
    return set(int(b) for b in drawn)


def start_experiment(
    state: ProgramState,
    size_fraction,
    length_days: int,
    rng: np.random.Generator,
    experiment_id: str | None = None,
) -> Experiment:
    """Draw buckets uniformly from the available set and occupy them from the
    current day."""
    k = buckets_for_fraction(size_fraction, state.num_buckets)
    available = np.flatnonzero(state.availability)
    if k > len(available):
        raise InsufficientBucketsError(
            f"need {k} buckets but only {len(available)} available"
        )
    drawn = rng.choice(available, size=k, replace=False)
    drawn.sort()
    exp = Experiment(
        id=experiment_id if experiment_id is not None else state.fresh_id(),
        size_fraction=float(size_fraction),
        num_buckets=k,
        length_days=length_days,
        start_day=state.clock,
        buckets=drawn,
        program=state.program,
    )
    state.availability[drawn] = False
    state.active.append(exp)
    return exp


def advance_day(state: ProgramState) -> list[Experiment]:
    """Advance the clock one day and free experiments that ended before the
    new day. Returns the stopped experiments."""
    state.clock += 1
    stopped = [exp for exp in state.active if exp.end_day < state.clock]
    if stopped:
        state.active = [exp for exp in state.active if exp.end_day >= state.clock]
        for exp in stopped:
            state.availability[exp.buckets] = True
    return stopped


def snapshot(state: ProgramState) -> tuple[np.ndarray, np.ndarray]:
    """(availability vector, sampling vector of the current day's starts).
    Both are fresh bool arrays; the state is not touched."""
    sampling = np.zeros(state.num_buckets, dtype=bool)
    for exp in state.active:
        if exp.start_day == state.clock:
            sampling[exp.buckets] = True
    return state.availability.copy(), sampling


def encode_rle(bits: np.ndarray) -> str:
    """Run-length encode a 0/1 vector as 'COUNTxBIT' tokens, e.g. '90x1,10x0'."""
    bits = np.asarray(bits).astype(np.uint8)
    if len(bits) == 0:
        return ""
    change = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(bits)]))
    return ",".join(f"{e - s}x{bits[s]}" for s, e in zip(starts, ends))


def decode_rle(encoded: str) -> np.ndarray:
    """Inverse of encode_rle."""
    if not encoded:
        return np.zeros(0, dtype=bool)
    parts = []
    for token in encoded.split(","):
        count, bit = token.split("x")
        parts.append(np.full(int(count), int(bit), dtype=bool))
    return np.concatenate(parts)


def export_state(state: ProgramState) -> dict:
    """JSON-ready document of the full program state."""
    return {
        "clock": state.clock,
        "num_buckets": state.num_buckets,
        "program": state.program,
        "experiments": [
            {
                "id": exp.id,
                "start_day": exp.start_day,
                "length_days": exp.length_days,
                "buckets": [int(b) for b in exp.buckets],
            }
            for exp in state.active
        ],
        "availability": encode_rle(state.availability),
    }
