"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to watch them).

The two program-study settings and the appendix contrast are module-scoped
fixtures so the expensive simulations run exactly once.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from bucketreuse import estimation, probability, simulation
from bucketreuse.seeds import STREAM_SCHEDULE, derive_rng

SEED = 0


def report(num: int, description: str, ok: bool) -> None:
    print(f"{'PASS' if ok else 'FAIL'} criterion {num}: {description}")
    assert ok, f"criterion {num} failed: {description}"


@pytest.fixture(scope="module")
def setting2_series():
    cfg = simulation.desk_scale(simulation.settings_catalog()["2"])
    start = time.perf_counter()
    series = simulation.run_program_sim(cfg)
    return series, time.perf_counter() - start


@pytest.fixture(scope="module")
def setting1_series():
    cfg = simulation.desk_scale(simulation.settings_catalog()["1"])
    start = time.perf_counter()
    series = simulation.run_program_sim(cfg)
    return series, time.perf_counter() - start


@pytest.fixture(scope="module")
def appendix1_series():
    cfg = simulation.desk_scale(simulation.settings_catalog()["appendix-1"])
    start = time.perf_counter()
    series = simulation.run_program_sim(cfg)
    return series, time.perf_counter() - start


def test_criterion_1_overlap_grid():
    expected = {
        (1000, 0.05): 0.23,
        (1000, 0.10): 0.27,
        (2000, 0.05): 0.34,
        (2000, 0.10): 0.37,
        (10000, 0.05): 0.70,
        (10000, 0.10): 0.73,
        (50000, 0.05): 0.98,
        (50000, 0.10): 0.99,
        (100000, 0.05): 1.00,
        (100000, 0.10): 1.00,
    }
    start = time.perf_counter()
    deviations = {
        cell: abs(
            probability.overlap_within_margin_prob(cell[0], cell[1], cell[1], 0.001)
            - want
        )
        for cell, want in expected.items()
    }
    elapsed = time.perf_counter() - start
    ok = max(deviations.values()) <= 0.005 and elapsed < 5.0
    report(
        1,
        f"ten overlap-probability grid cells within 0.005 "
        f"(worst {max(deviations.values()):.4f}, {elapsed:.2f}s)",
        ok,
    )


def test_criterion_2_contamination_values():
    start = time.perf_counter()
    single = probability.hypergeom_pmf(probability.HypergeomParams(2, 1, 1), 1)
    double = probability.hypergeom_pmf(probability.HypergeomParams(4, 2, 2), 2)
    window = probability.bad_bucket_window_prob(1000, 1000, 1000, 0.5, 0.03)
    elapsed = time.perf_counter() - start
    ok = (
        single == 0.5
        and abs(double - 0.167) <= 0.0005
        and abs(window - 0.9927) <= 0.0001
        and elapsed < 1.0
    )
    report(
        2,
        f"contamination values 0.5 / {double:.4f} / {window:.5f} ({elapsed:.2f}s)",
        ok,
    )


def test_criterion_3_minimum_bucket_counts():
    ok = (
        probability.min_buckets_for_smallest_experiment(0.001) == 1_000_000
        and probability.min_buckets_for_smallest_experiment(0.0005) == 4_000_000
    )
    report(3, "exact minimum bucket counts for 0.1% and 0.05% experiments", ok)


def _battery(seed: int):
    rng = derive_rng(seed, STREAM_SCHEDULE, 12345)
    for _ in range(20):
        b = int(rng.integers(2, 6))
        n_b = int(rng.integers(1, 4))
        y0 = rng.integers(-9, 10, size=(1, b * n_b))
        y1 = rng.integers(-9, 10, size=(1, b * n_b))
        pop = estimation.Population(np.arange(b * n_b) // n_b, y0, y1)
        yield pop


def test_criterion_4_unbiasedness_oracle():
    start = time.perf_counter()
    checks = 0
    ok = True
    for pop in _battery(SEED):
        for k in range(1, pop.num_buckets + 1):
            if (k * pop.bucket_size) % 2 != 0:
                continue
            mean, ate = estimation.enumerate_unbiasedness(pop, k, 0)
            ok &= mean == ate
            checks += 1
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    report(
        4,
        f"exact design-mean equality on {checks} enumerations over 20 "
        f"populations ({elapsed:.1f}s)",
        ok,
    )


def test_criterion_5_restricted_oracle():
    start = time.perf_counter()
    checks = 0
    ok = True
    for pop in _battery(SEED):
        k = 2 if pop.bucket_size % 2 else 1
        for subset in range(2, pop.num_buckets + 1):
            if k > subset:
                continue
            mean, ate = estimation.enumerate_restricted_unbiasedness(pop, subset, k, 0)
            ok &= mean == ate
            checks += 1
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 120.0
    report(
        5,
        f"exact restricted-design equality on {checks} subset enumerations "
        f"({elapsed:.1f}s)",
        ok,
    )


def test_criterion_6_counting_identities():
    start = time.perf_counter()
    ok = all(
        probability.counting_identities_check(b, k)
        for b in range(1, 31)
        for k in range(1, b + 1)
    )
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 1.0
    report(6, f"counting identity for all B <= 30 ({elapsed:.2f}s)", ok)


def test_criterion_7_sampling_distribution_equivalence():
    cfg = simulation.SamplingSimConfig(
        replications=20,
        samples_per_population=20,
        assignments_per_sample=20,
        seed=SEED,
    )
    start = time.perf_counter()
    result = simulation.run_sampling_distribution_sim(cfg)
    elapsed = time.perf_counter() - start
    ks = ks_2samp(result.flat_t_stats("unit"), result.flat_t_stats("bucket")).statistic
    ratio = result.flat_estimates("bucket").var(ddof=1) / result.flat_estimates(
        "unit"
    ).var(ddof=1)
    ok = ks < 0.1 and not (0.95 <= ratio <= 1.05) and elapsed < 300.0
    report(
        7,
        f"t-statistic KS distance {ks:.3f} < 0.1 with estimator variance "
        f"ratio {ratio:.3f} outside [0.95, 1.05] ({elapsed:.1f}s)",
        ok,
    )


def test_criterion_8_dependency_decay(setting1_series, setting2_series):
    s2, rt2 = setting2_series
    s1, rt1 = setting1_series
    bias2 = s2.mean_abs_start_bias(2)
    bias28 = s2.mean_abs_start_bias(28)
    cor28_s2 = abs(s2.availability_cor_mean[s2.delta_index(28)])
    cor28_s1 = abs(s1.availability_cor_mean[s1.delta_index(28)])
    ok = (
        bias28 < 0.10 * bias2
        and cor28_s2 < 0.02
        and cor28_s1 > cor28_s2
        and rt1 < 600.0
        and rt2 < 600.0
    )
    report(
        8,
        f"bias decay {bias28:.5f} < 10% of {bias2:.5f}, availability "
        f"correlation {cor28_s2:.4f} < 0.02 at day 28, slower setting-1 decay "
        f"({cor28_s1:.4f} > {cor28_s2:.4f}; {rt1:.0f}s/{rt2:.0f}s)",
        ok,
    )


def test_criterion_9_bucket_count_contrast(setting1_series, appendix1_series):
    fine, _ = setting1_series
    coarse, rt = appendix1_series
    i_fine = fine.delta_index(2)
    i_coarse = coarse.delta_index(2)
    lo_coarse = coarse.ate1_bias_abs_mean[i_coarse] - 1.96 * coarse.ate1_bias_abs_se[i_coarse]
    hi_fine = fine.ate1_bias_abs_mean[i_fine] + 1.96 * fine.ate1_bias_abs_se[i_fine]
    ok = (
        coarse.ate1_bias_abs_mean[i_coarse] > fine.ate1_bias_abs_mean[i_fine]
        and lo_coarse > hi_fine
        and rt < 600.0
    )
    report(
        9,
        f"day-2 bias magnitude {coarse.ate1_bias_abs_mean[i_coarse]:.4f} (100 "
        f"buckets) vs {fine.ate1_bias_abs_mean[i_fine]:.4f} (10000 buckets), "
        f"95% intervals disjoint ({rt:.0f}s)",
        ok,
    )


def test_criterion_10_long_experiment_dependency():
    # one experiment occupying 10% of buckets, sampled on day 1 and stopped
    # 30 days later: availability repeats through day 31 and returns to
    # all-available from day 32
    b = 100
    rng = derive_rng(SEED, STREAM_SCHEDULE, 777)
    occupied = rng.choice(b, size=10, replace=False)
    vec = np.ones(b, dtype=int)
    vec[occupied] = 0
    series = np.concatenate([np.tile(vec, (31, 1)), np.ones((10, b), dtype=int)])
    means = estimation.mean_cor_by_lag(series)
    tolerance = estimation.DEFAULT_COR_TOLERANCE
    all_correlated = all(abs(means[d - 1]) > tolerance for d in range(1, 31))
    found = estimation.delta_hat(series, tolerance=tolerance)
    ok = all_correlated and found is not None and found > 30
    report(
        10,
        f"lags 1..30 all correlated, first independent lag {found} > 30",
        ok,
    )


def _run_cli(args: list[str], cwd: Path) -> bytes:
    proc = subprocess.run(
        [sys.executable, "-m", "bucketreuse.cli", *args],
        cwd=cwd,
        capture_output=True,
        check=True,
    )
    return proc.stdout


def test_criterion_11_byte_determinism(tmp_path):
    sched = tmp_path / "sched.json"
    sched.write_text(
        json.dumps(
            {
                "num_buckets": 50,
                "horizon_days": 5,
                "experiments": [
                    {"id": "A", "start_day": 1, "size_fraction": 0.3, "length_days": 2},
                    {"id": "B", "start_day": 2, "size_fraction": 0.2, "length_days": 2},
                ],
            }
        )
    )
    series = tmp_path / "series.csv"
    series.write_text("\n".join(["1,0,1,0,1,1", "1,1,0,0,1,1", "1,0,1,1,0,1"]) + "\n")
    ids = tmp_path / "ids.txt"
    ids.write_text("alpha\nbeta\ngamma\n")
    program_cfg = tmp_path / "program.json"
    program_cfg.write_text(
        json.dumps(
            {
                "num_buckets": 300,
                "horizon_days": 15,
                "num_starting_points": 2,
                "replications_per_start": 25,
                "length_distribution": [1, 3, 5],
                "size_distribution": [0.08, 0.12],
                "target_traffic": 0.6,
            }
        )
    )
    sampling_cfg = tmp_path / "sampling.json"
    sampling_cfg.write_text(
        json.dumps(
            {"replications": 3, "samples_per_population": 4, "assignments_per_sample": 4}
        )
    )

    stdout_commands = [
        ["bucketize", "--salt", "s", "--buckets", "100", "--ids-file", str(ids)],
        ["coordinate", "--config", str(sched), "--seed", "3"],
        ["prob", "overlap", "--buckets", "2000", "--frac1", "0.05", "--frac2", "0.05",
         "--margin-pp", "0.001"],
        ["prob", "bad-buckets", "--bad", "50", "--neutral", "50", "--draws", "40",
         "--margin", "0.05"],
        ["size", "min-buckets", "--smallest", "0.001"],
        ["count", "samples", "--buckets", "30", "--sample-buckets", "12"],
        ["estimate", "delta", "--series", str(series), "--tolerance", "0.2"],
        ["selftest", "--seed", "1"],
    ]
    ok = True
    for args in stdout_commands:
        ok &= _run_cli(args, tmp_path) == _run_cli(args, tmp_path)

    file_commands = [
        (
            ["simulate", "program", "--setting", "custom", "--config", str(program_cfg),
             "--seed", "7"],
            ["metrics.csv", "run_meta.json"],
        ),
        (
            ["simulate", "program", "--setting", "custom", "--config", str(program_cfg),
             "--seed", "7", "--threads", "4"],
            ["metrics.csv", "run_meta.json"],
        ),
        (
            ["simulate", "sampling-dist", "--config", str(sampling_cfg), "--seed", "7"],
            ["draws.csv", "run_meta.json"],
        ),
    ]
    for idx, (args, names) in enumerate(file_commands):
        out_a = tmp_path / f"det{idx}a"
        out_b = tmp_path / f"det{idx}b"
        _run_cli([*args, "--out", str(out_a)], tmp_path)
        _run_cli([*args, "--out", str(out_b)], tmp_path)
        for name in names:
            ok &= (out_a / name).read_bytes() == (out_b / name).read_bytes()

    # worker count must not change the data either
    one = tmp_path / "det0a" / "metrics.csv"
    four = tmp_path / "det1a" / "metrics.csv"
    ok &= one.read_bytes() == four.read_bytes()

    report(11, "all subcommands byte-identical on rerun, including --threads 4", ok)
