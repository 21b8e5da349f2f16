"""Seeded Monte Carlo harnesses.

Two studies:

* sampling-distribution study: difference-in-means estimates and Welch
  t-statistics under unit-level vs bucket-level sampling of a null
  population with a bucket-level outcome component (intra-class
  correlation).

* program study: programs of exclusive experiments evolved day by day from
  random starting points, recording how availability, sampling, and the
  day-one treatment-effect estimate depend on the day.

Determinism: all randomness is derived from the config seed through
`seeds.derive_rng`; replication work is split into fixed-size chunks whose
partial sums are reduced in index order, so results are bit-identical for
any worker count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coordination, estimation, seeds

__all__ = [
    "ConfigInvalidError",
    "SamplingSimConfig",
    "SamplingSimResult",
    "run_sampling_distribution_sim",
    "ProgramSimConfig",
    "MetricSeries",
    "generate_starting_point",
    "run_program_sim",
    "settings_catalog",
    "desk_scale",
    "LENGTHS_EMPIRICAL",
    "LENGTHS_LONG",
    "SIZES_EMPIRICAL",
    "SIZES_LARGE",
]

_CHUNK_REPLICATIONS = 100


class ConfigInvalidError(ValueError):
    """Raised when a simulation config violates its invariants."""


# ---------------------------------------------------------------------------
# Sampling-distribution study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingSimConfig:
    """Parameters of the sampling-distribution study.

    Outcomes follow y = icc_coefficient * Z[bucket] + X[unit] with Z and X
    standard normal around 1; treatment never changes the outcome, so every
    estimate is pure sampling noise around zero.
    """

    replications: int = 100
    population_size: int = 10000
    sample_size: int = 1000
    num_buckets: int = 20
    bucket_size: int = 500
    samples_per_population: int = 100
    assignments_per_sample: int = 100
    icc_coefficient: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size != self.num_buckets * self.bucket_size:
            raise ConfigInvalidError(
                f"population_size must equal num_buckets * bucket_size, "
                f"got {self.population_size} != {self.num_buckets} * {self.bucket_size}"
            )
        if self.sample_size % self.bucket_size != 0:
            raise ConfigInvalidError(
                f"sample_size {self.sample_size} must be divisible by "
                f"bucket_size {self.bucket_size}"
            )
        if self.sample_size % 2 != 0:
            raise ConfigInvalidError(f"sample_size {self.sample_size} must be even")
        for name in ("replications", "samples_per_population", "assignments_per_sample"):
            if getattr(self, name) < 1:
                raise ConfigInvalidError(f"{name} must be >= 1")


STRATEGIES = ("unit", "bucket")


@dataclass(frozen=True)
class SamplingSimResult:
    """Estimates and t-statistics indexed (replication, sample, assignment)."""

    config: SamplingSimConfig
    estimates: dict[str, np.ndarray]
    t_stats: dict[str, np.ndarray]

    def flat_estimates(self, strategy: str) -> np.ndarray:
        return self.estimates[strategy].ravel()

    def flat_t_stats(self, strategy: str) -> np.ndarray:
        return self.t_stats[strategy].ravel()


def _sampling_replication(cfg: SamplingSimConfig, rep: int) -> dict[str, np.ndarray]:
    """One replication: fresh population, then every (strategy, sample,
    assignment) cell. Results keyed 'est'/'t' per strategy."""
    bucket_of = np.arange(cfg.population_size) // cfg.bucket_size
    sample_buckets = cfg.sample_size // cfg.bucket_size
    rng = seeds.derive_rng(cfg.seed, seeds.STREAM_POPULATION, rep)
    z = 1.0 + rng.standard_normal(cfg.num_buckets)
    x = 1.0 + rng.standard_normal(cfg.population_size)
    y = cfg.icc_coefficient * z[bucket_of] + x
    pop = estimation.Population(bucket_of=bucket_of, y0=y, y1=y)
    shape = (cfg.samples_per_population, cfg.assignments_per_sample)
    out = {
        f"{kind}:{strategy}": np.empty(shape)
        for kind in ("est", "t")
        for strategy in STRATEGIES
    }
    half = cfg.sample_size // 2
    for strategy in STRATEGIES:
        for s in range(cfg.samples_per_population):
            if strategy == "unit":
                units = rng.choice(
                    cfg.population_size, size=cfg.sample_size, replace=False
                )
                buckets: tuple[int, ...] = ()
            else:
                chosen = rng.choice(cfg.num_buckets, size=sample_buckets, replace=False)
                chosen.sort()
                buckets = tuple(int(b) for b in chosen)
                units = pop.units_in_buckets(chosen)
            for a in range(cfg.assignments_per_sample):
                assignment = np.zeros(cfg.sample_size, dtype=np.int64)
                assignment[rng.choice(cfg.sample_size, size=half, replace=False)] = 1
                draw = estimation.SampleDraw(buckets, units, assignment)
                out[f"est:{strategy}"][s, a] = estimation.diff_in_means(draw, pop, 0)
                out[f"t:{strategy}"][s, a] = estimation.welch_t(draw, pop, 0)
    return out


def run_sampling_distribution_sim(
    cfg: SamplingSimConfig, threads: int = 1
) -> SamplingSimResult:
    """Run the sampling-distribution study.

    Per replication the draw order is: bucket components Z, unit components
    X, then all samples and assignments for the unit strategy, then the same
    for the bucket strategy. Replications are seed-derived independently and
    written into index-addressed slots, so any worker count gives identical
    results.
    """
    shape = (cfg.replications, cfg.samples_per_population, cfg.assignments_per_sample)
    estimates = {s: np.empty(shape) for s in STRATEGIES}
    t_stats = {s: np.empty(shape) for s in STRATEGIES}

    def worker(rep: int) -> dict[str, np.ndarray]:
        return _sampling_replication(cfg, rep)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(worker, range(cfg.replications)))
    else:
        per_rep = [worker(rep) for rep in range(cfg.replications)]

    for rep, out in enumerate(per_rep):
        for strategy in STRATEGIES:
            estimates[strategy][rep] = out[f"est:{strategy}"]
            t_stats[strategy][rep] = out[f"t:{strategy}"]

    return SamplingSimResult(config=cfg, estimates=estimates, t_stats=t_stats)


# ---------------------------------------------------------------------------
# Program study
# ---------------------------------------------------------------------------

LENGTHS_EMPIRICAL = (1, 2, 3, 7, 7, 8, 8, 8, 12, 13, 14, 14, 14, 14, 15, 21, 21, 21, 30)
LENGTHS_LONG = (21, 28)
SIZES_EMPIRICAL = (0.02, 0.02, 0.02, 0.02, 0.05, 0.05, 0.08, 0.09, 0.10, 0.10)
SIZES_LARGE = (0.20, 0.25)


@dataclass(frozen=True)
class ProgramSimConfig:
    """Parameters of the program study. Sizes are population fractions;
    lengths are days; each started experiment draws one of each uniformly."""

    length_distribution: tuple[int, ...]
    size_distribution: tuple[float, ...]
    target_traffic: float
    num_buckets: int = 10000
    horizon_days: int = 90
    num_starting_points: int = 50
    replications_per_start: int = 10000
    effect_mean: float = 3.0
    effect_variance: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.length_distribution or min(self.length_distribution) < 1:
            raise ConfigInvalidError("length_distribution needs positive day counts")
        if not self.size_distribution or not all(
            0 < s <= 1 for s in self.size_distribution
        ):
            raise ConfigInvalidError("size_distribution fractions must be in (0, 1]")
        if not 0 < self.target_traffic <= 1:
            raise ConfigInvalidError(
                f"target_traffic must be in (0, 1], got {self.target_traffic}"
            )
        if self.horizon_days < 2:
            raise ConfigInvalidError("horizon_days must be >= 2")
        if self.num_buckets < 2:
            raise ConfigInvalidError("num_buckets must be >= 2")
        if self.num_starting_points < 1 or self.replications_per_start < 1:
            raise ConfigInvalidError("need at least one starting point and replication")
        if self.effect_variance < 0:
            raise ConfigInvalidError("effect_variance must be >= 0")


@dataclass(frozen=True)
class MetricSeries:
    """Per-day metrics pooled over starting points and replications.

    deltas are day indices; day 1 is the starting day, so the correlations at
    delta compare day delta against day 1. Bias entries aggregate the day-one
    effect gap of the pool feeding each day's sampled experiments, recorded on
    days where at least one experiment started (n_effective counts those).
    """

    deltas: np.ndarray
    availability_cor_mean: np.ndarray
    availability_cor_n: np.ndarray
    sampling_cor_mean: np.ndarray
    sampling_cor_n: np.ndarray
    ate1_bias_mean: np.ndarray
    ate1_bias_sd: np.ndarray
    ate1_bias_abs_mean: np.ndarray
    ate1_bias_abs_se: np.ndarray
    n_effective: np.ndarray
    start_bias_means: np.ndarray  # (starting points, deltas), NaN where undefined

    def delta_index(self, delta: int) -> int:
        idx = int(np.searchsorted(self.deltas, delta))
        if idx >= len(self.deltas) or self.deltas[idx] != delta:
            raise KeyError(f"delta {delta} not in series")
        return idx

    def mean_abs_start_bias(self, delta: int) -> float:
        """Mean over starting points of |per-start mean bias| at a day."""
        col = self.start_bias_means[:, self.delta_index(delta)]
        return float(np.nanmean(np.abs(col)))


def generate_starting_point(
    cfg: ProgramSimConfig, rng: np.random.Generator
) -> coordination.ProgramState:
    """Fill a fresh program with day-one experiments until the traffic target
    is met or the next draw no longer fits.

    Each experiment draws (size, full length, residual length) in that order;
    the residual, uniform on {1..length}, stands in for how much of an
    already-running experiment remains, so day-one experiments expire at
    staggered days the way an ongoing program's would.
    """
    state = coordination.ProgramState(cfg.num_buckets)
    sizes = cfg.size_distribution
    lengths = cfg.length_distribution
    occupied = 0
    while occupied < cfg.target_traffic * cfg.num_buckets:
        size = sizes[rng.integers(len(sizes))]
        length = int(lengths[rng.integers(len(lengths))])
        k = coordination.buckets_for_fraction(size, cfg.num_buckets)
        if k > cfg.num_buckets - occupied:
            break
        residual = int(rng.integers(1, length + 1))
        coordination.start_experiment(state, size, residual, rng)
        occupied += k
    return state


def _clone_state(state: coordination.ProgramState) -> coordination.ProgramState:
    clone = coordination.ProgramState(state.num_buckets, program=state.program)
    clone.clock = state.clock
    clone.active = list(state.active)
    clone.availability = state.availability.copy()
    clone._next_id = state._next_id
    return clone


def _binary_cor(n: int, s1: int, s2: np.ndarray, s12: np.ndarray) -> np.ndarray:
    """cor_star of a fixed binary vector (sum s1) against many (sums s2,
    intersections s12), vectorized; NaN encodes the undefined case."""
    s2 = s2.astype(np.int64)
    s12 = s12.astype(np.int64)
    out = np.full(len(s2), np.nan)
    if 0 < s1 < n:
        nondeg = (s2 > 0) & (s2 < n)
        with np.errstate(invalid="ignore"):
            num = n * s12 - s1 * s2
            den = np.sqrt(float(n * s1 - s1 * s1) * (n * s2 - s2 * s2).astype(float))
            out = np.where(nondeg, num / np.where(den == 0, np.nan, den), np.nan)
        out[s2 == n] = 0.0
    elif s1 == n:
        out[:] = 0.0
    else:  # s1 == 0
        out[s2 == n] = 0.0
        out[s2 == 0] = 1.0
    return out


def _replication_day_stats(
    cfg: ProgramSimConfig,
    start_state: coordination.ProgramState,
    effects: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evolve one replication over the horizon.

    Returns (availability cor vs day 1, sampling cor vs day 1, day-one bias),
    one entry per day, NaN where undefined. Each day stops due experiments,
    then starts draws of (size, length) while traffic is below target and the
    draw fits; an unfitting draw ends the day's starts.
    """
    b = cfg.num_buckets
    horizon = cfg.horizon_days
    state = _clone_state(start_state)
    target = cfg.target_traffic * b
    sizes = cfg.size_distribution
    lengths = cfg.length_distribution
    effect_mean = float(effects.mean())

    avail_sum = np.empty(horizon, dtype=np.int64)
    avail_dot = np.empty(horizon, dtype=np.int64)
    samp_sum = np.empty(horizon, dtype=np.int64)
    samp_dot = np.empty(horizon, dtype=np.int64)
    bias = np.full(horizon, np.nan)

    day1_avail = state.availability.copy()
    day1_samp = np.zeros(b, dtype=bool)
    for exp in state.active:
        day1_samp[exp.buckets] = True

    avail_count = int(state.availability.sum())
    sampling = np.zeros(b, dtype=bool)

    for day_idx in range(horizon):
        if day_idx == 0:
            # Starting-day pool is the whole population, so the bias is zero
            # by construction; the day's sample is the starting experiments.
            sampling[:] = day1_samp
            started = len(state.active) > 0
            pool_count, pool_effect = b, float(effects.sum())
        else:
            for exp in coordination.advance_day(state):
                avail_count += exp.num_buckets
            pool_count = avail_count
            pool_effect = float(effects[state.availability].sum())
            sampling[:] = False
            started = False
            while b - avail_count < target:
                size = sizes[rng.integers(len(sizes))]
                length = int(lengths[rng.integers(len(lengths))])
                k = coordination.buckets_for_fraction(size, b)
                if k > avail_count:
                    break
                exp = coordination.start_experiment(state, size, length, rng)
                sampling[exp.buckets] = True
                avail_count -= k
                started = True

        avail = state.availability
        avail_sum[day_idx] = avail_count
        avail_dot[day_idx] = np.count_nonzero(avail & day1_avail)
        samp_sum[day_idx] = np.count_nonzero(sampling)
        samp_dot[day_idx] = np.count_nonzero(sampling & day1_samp)
        if started and pool_count > 0:
            bias[day_idx] = effect_mean - pool_effect / pool_count

    avail_cor = _binary_cor(b, int(avail_sum[0]), avail_sum, avail_dot)
    samp_cor = _binary_cor(b, int(samp_sum[0]), samp_sum, samp_dot)
    return avail_cor, samp_cor, bias


@dataclass
class _ChunkSums:
    ac_sum: np.ndarray
    ac_n: np.ndarray
    sc_sum: np.ndarray
    sc_n: np.ndarray
    b_sum: np.ndarray
    b_sq: np.ndarray
    b_abs: np.ndarray
    b_n: np.ndarray


def _simulate_chunk(
    cfg: ProgramSimConfig,
    start_state: coordination.ProgramState,
    effects: np.ndarray,
    sp_index: int,
    rep_range: range,
) -> _ChunkSums:
    horizon = cfg.horizon_days
    sums = _ChunkSums(
        ac_sum=np.zeros(horizon),
        ac_n=np.zeros(horizon, dtype=np.int64),
        sc_sum=np.zeros(horizon),
        sc_n=np.zeros(horizon, dtype=np.int64),
        b_sum=np.zeros(horizon),
        b_sq=np.zeros(horizon),
        b_abs=np.zeros(horizon),
        b_n=np.zeros(horizon, dtype=np.int64),
    )
    for rep in rep_range:
        rng = seeds.derive_rng(cfg.seed, seeds.STREAM_REPLICATION, sp_index, rep)
        avail_cor, samp_cor, bias = _replication_day_stats(
            cfg, start_state, effects, rng
        )
        for cor, total, count in (
            (avail_cor, sums.ac_sum, sums.ac_n),
            (samp_cor, sums.sc_sum, sums.sc_n),
        ):
            defined = ~np.isnan(cor)
            total[defined] += cor[defined]
            count += defined
        defined = ~np.isnan(bias)
        sums.b_sum[defined] += bias[defined]
        sums.b_sq[defined] += bias[defined] ** 2
        sums.b_abs[defined] += np.abs(bias[defined])
        sums.b_n += defined
    return sums


def run_program_sim(cfg: ProgramSimConfig, threads: int = 1) -> MetricSeries:
    """Run the program study: every starting point gets its own frozen bucket
    effects and day-one state, then replications evolve the program over the
    horizon. Results are identical for any `threads` value."""
    horizon = cfg.horizon_days
    n_sp = cfg.num_starting_points

    starts = []
    for sp in range(n_sp):
        sp_rng = seeds.derive_rng(cfg.seed, seeds.STREAM_STARTING_POINT, sp)
        state = generate_starting_point(cfg, sp_rng)
        eff_rng = seeds.derive_rng(cfg.seed, seeds.STREAM_BUCKET_EFFECTS, sp)
        effects = cfg.effect_mean + np.sqrt(cfg.effect_variance) * eff_rng.standard_normal(
            cfg.num_buckets
        )
        starts.append((state, effects))

    tasks = []
    for sp in range(n_sp):
        for lo in range(0, cfg.replications_per_start, _CHUNK_REPLICATIONS):
            hi = min(lo + _CHUNK_REPLICATIONS, cfg.replications_per_start)
            tasks.append((sp, range(lo, hi)))

    def run_task(task):
        sp, rep_range = task
        state, effects = starts[sp]
        return _simulate_chunk(cfg, state, effects, sp, rep_range)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunk_sums = list(pool.map(run_task, tasks))
    else:
        chunk_sums = [run_task(t) for t in tasks]

    # Reduce in task order: first pooled over everything, then per starting
    # point for the per-start bias means.
    zeros = lambda: np.zeros(horizon)
    izeros = lambda: np.zeros(horizon, dtype=np.int64)
    ac_sum, sc_sum, b_sum, b_sq, b_abs = (zeros() for _ in range(5))
    ac_n, sc_n, b_n = (izeros() for _ in range(3))
    sp_b_sum = np.zeros((n_sp, horizon))
    sp_b_n = np.zeros((n_sp, horizon), dtype=np.int64)
    for (sp, _), sums in zip(tasks, chunk_sums):
        ac_sum += sums.ac_sum
        ac_n += sums.ac_n
        sc_sum += sums.sc_sum
        sc_n += sums.sc_n
        b_sum += sums.b_sum
        b_sq += sums.b_sq
        b_abs += sums.b_abs
        b_n += sums.b_n
        sp_b_sum[sp] += sums.b_sum
        sp_b_n[sp] += sums.b_n

    with np.errstate(invalid="ignore", divide="ignore"):
        ac_mean = np.where(ac_n > 0, ac_sum / np.maximum(ac_n, 1), np.nan)
        sc_mean = np.where(sc_n > 0, sc_sum / np.maximum(sc_n, 1), np.nan)
        b_mean = np.where(b_n > 0, b_sum / np.maximum(b_n, 1), np.nan)
        b_var = np.where(
            b_n > 1,
            (b_sq - b_n * b_mean**2) / np.maximum(b_n - 1, 1),
            np.nan,
        )
        b_sd = np.sqrt(np.maximum(b_var, 0.0))
        b_abs_mean = np.where(b_n > 0, b_abs / np.maximum(b_n, 1), np.nan)
        b_abs_var = np.where(
            b_n > 1,
            (b_sq - b_n * b_abs_mean**2) / np.maximum(b_n - 1, 1),
            np.nan,
        )
        b_abs_se = np.sqrt(np.maximum(b_abs_var, 0.0) / np.maximum(b_n, 1))
        sp_means = np.where(sp_b_n > 0, sp_b_sum / np.maximum(sp_b_n, 1), np.nan)

    keep = slice(0, horizon - 1)  # report days 1 .. horizon-1
    return MetricSeries(
        deltas=np.arange(1, horizon),
        availability_cor_mean=ac_mean[keep],
        availability_cor_n=ac_n[keep],
        sampling_cor_mean=sc_mean[keep],
        sampling_cor_n=sc_n[keep],
        ate1_bias_mean=b_mean[keep],
        ate1_bias_sd=b_sd[keep],
        ate1_bias_abs_mean=b_abs_mean[keep],
        ate1_bias_abs_se=b_abs_se[keep],
        n_effective=b_n[keep],
        start_bias_means=sp_means[:, keep],
    )


def settings_catalog() -> dict[str, ProgramSimConfig]:
    """The six named program settings plus their 100-bucket variants
    (keys 'appendix-1' .. 'appendix-6'). All at full scale."""
    rows = {
        "1": (LENGTHS_EMPIRICAL, SIZES_EMPIRICAL, 0.90),
        "2": (LENGTHS_EMPIRICAL, SIZES_EMPIRICAL, 0.50),
        "3": (LENGTHS_LONG, SIZES_EMPIRICAL, 0.90),
        "4": (LENGTHS_EMPIRICAL, SIZES_LARGE, 0.90),
        "5": (LENGTHS_LONG, SIZES_LARGE, 0.90),
        "6": (LENGTHS_LONG, SIZES_LARGE, 0.50),
    }
    catalog: dict[str, ProgramSimConfig] = {}
    for name, (lengths, sizes, traffic) in rows.items():
        catalog[name] = ProgramSimConfig(
            length_distribution=lengths,
            size_distribution=sizes,
            target_traffic=traffic,
        )
        catalog[f"appendix-{name}"] = dataclasses.replace(
            catalog[name], num_buckets=100
        )
    return catalog


def desk_scale(cfg: ProgramSimConfig) -> ProgramSimConfig:
    """Shrink a config to the desk-scale default of 10 starting points and
    1000 replications each."""
    return dataclasses.replace(
        cfg, num_starting_points=10, replications_per_start=1000
    )
