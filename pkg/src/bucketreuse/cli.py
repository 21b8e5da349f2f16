"""Command-line interface. Every subcommand is deterministic: all randomness
flows from --seed, JSON is emitted with sorted keys, CSV with LF endings, and
run metadata never includes wall-clock values unless --record-timing asks for
them. Rerunning a command with the same argv therefore reproduces its output
files byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, bucketing, coordination, estimation, probability, simulation
from .seeds import STREAM_SCHEDULE, derive_rng

_RUNTIME_ERRORS = (
    ValueError,
    KeyError,
    RuntimeError,
    OSError,
    estimation.UnknownTimeError,
)


def _fail_on_runtime_error(fn):
    """Convert library errors into clean exit-code-1 failures."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except _RUNTIME_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _print_json(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True))


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _run_meta(config: dict, seed: int, timing: tuple[float, float] | None) -> dict:
    return {
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "hash_function": bucketing.HASH_FUNCTION_ID,
        "started_at": timing[0] if timing else None,
        "finished_at": timing[1] if timing else None,
    }


def _write_run_meta(path: Path, config: dict, seed: int, timing) -> None:
    with open(path, "w") as fh:
        json.dump(_run_meta(config, seed, timing), fh, sort_keys=True, indent=2)
        fh.write("\n")


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Bucket-reuse experimentation toolkit."""


# ---------------------------------------------------------------------------
# bucketize
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--salt", default="", help="Salt suffixed to every id before hashing.")
@click.option("--buckets", "num_buckets", type=int, required=True)
@click.option("--id", "single_id", default=None, help="Bucket one id.")
@click.option(
    "--ids-file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Bucket every non-empty line of a file.",
)
@_fail_on_runtime_error
def bucketize(salt: str, num_buckets: int, single_id: str | None, ids_file: str | None):
    """Map unit ids to buckets; writes one `id,bucket` row per id."""
    if (single_id is None) == (ids_file is None):
        raise click.UsageError("exactly one of --id or --ids-file is required")
    cfg = bucketing.BucketingConfig(num_buckets=num_buckets, salt=salt)
    if single_id is not None:
        ids = [single_id]
    else:
        with open(ids_file, encoding="utf-8") as fh:
            ids = [line.rstrip("\n") for line in fh if line.strip()]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    for unit_id in ids:
        writer.writerow([unit_id, bucketing.hash_to_bucket(unit_id, cfg)])


# ---------------------------------------------------------------------------
# coordinate
# ---------------------------------------------------------------------------


@cli.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="JSON schedule: num_buckets, horizon_days, experiments[].",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the daily CSV here instead of stdout.")
@click.option("--export-state", "export_path", type=click.Path(dir_okay=False),
              default=None, help="Write the final program state as JSON.")
@_fail_on_runtime_error
def coordinate(config_path: str, seed: int, out: str | None, export_path: str | None):
    """Replay a scripted experiment schedule and emit daily availability."""
    with open(config_path) as fh:
        config = json.load(fh)
    num_buckets = config["num_buckets"]
    horizon = config["horizon_days"]
    schedule: dict[int, list[dict]] = {}
    for exp in config.get("experiments", []):
        schedule.setdefault(int(exp["start_day"]), []).append(exp)

    rng = derive_rng(seed, STREAM_SCHEDULE)
    state = coordination.ProgramState(num_buckets)
    rows = []
    for day in range(1, horizon + 1):
        stopped = coordination.advance_day(state) if day > 1 else []
        started = []
        for exp in schedule.get(day, []):
            started.append(
                coordination.start_experiment(
                    state,
                    exp["size_fraction"],
                    int(exp["length_days"]),
                    rng,
                    experiment_id=str(exp["id"]),
                )
            )
        rows.append(
            (
                day,
                state.available_count,
                ";".join(e.id for e in started),
                ";".join(e.id for e in stopped),
            )
        )

    header = ["day", "available_count", "started_ids", "stopped_ids"]
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        _write_csv(Path(out), header, rows)
    if export_path is not None:
        with open(export_path, "w") as fh:
            json.dump(coordination.export_state(state), fh, sort_keys=True, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# prob / size / count
# ---------------------------------------------------------------------------


@cli.group()
def prob() -> None:
    """Exact design probabilities."""


@prob.command()
@click.option("--buckets", "num_buckets", type=int, required=True)
@click.option("--frac1", type=float, required=True)
@click.option("--frac2", type=float, required=True)
@click.option("--margin-pp", type=float, required=True)
@_fail_on_runtime_error
def overlap(num_buckets: int, frac1: float, frac2: float, margin_pp: float):
    """Probability two cross-program experiments overlap near expectation."""
    value = probability.overlap_within_margin_prob(num_buckets, frac1, frac2, margin_pp)
    _print_json(
        {
            "buckets": num_buckets,
            "frac1": frac1,
            "frac2": frac2,
            "margin_pp": margin_pp,
            "value": value,
        }
    )


@prob.command("bad-buckets")
@click.option("--bad", type=int, required=True, help="Bad buckets in the pool.")
@click.option("--neutral", type=int, required=True, help="Neutral buckets in the pool.")
@click.option("--draws", type=int, required=True)
@click.option("--margin", type=float, required=True)
@click.option("--center", type=float, default=0.5, show_default=True)
@_fail_on_runtime_error
def bad_buckets(bad: int, neutral: int, draws: int, margin: float, center: float):
    """Probability the drawn bad-bucket share lands inside the window."""
    value = probability.bad_bucket_window_prob(bad, neutral, draws, center, margin)
    _print_json(
        {
            "bad": bad,
            "neutral": neutral,
            "draws": draws,
            "center": center,
            "margin": margin,
            "value": value,
        }
    )


@cli.group()
def size() -> None:
    """Bucket-count sizing."""


@size.command("min-buckets")
@click.option("--smallest", type=float, required=True,
              help="Smallest allowed experiment as a population fraction.")
@_fail_on_runtime_error
def min_buckets(smallest: float):
    """Buckets needed to respread samples of the smallest experiment size."""
    value = probability.min_buckets_for_smallest_experiment(smallest)
    _print_json({"smallest": smallest, "value": value})


@cli.group()
def count() -> None:
    """Exact counting."""


@count.command("samples")
@click.option("--buckets", "num_buckets", type=int, required=True)
@click.option("--sample-buckets", type=int, required=True)
@_fail_on_runtime_error
def count_samples(num_buckets: int, sample_buckets: int):
    """Number of distinct bucket samples C(B, k)."""
    value = probability.num_bucket_samples(num_buckets, sample_buckets)
    _print_json(
        {"buckets": num_buckets, "sample_buckets": sample_buckets, "value": value}
    )


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


@cli.group()
def estimate() -> None:
    """Dependency estimation from recorded availability."""


@estimate.command("delta")
@click.option(
    "--series",
    "series_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="CSV with one row per day of comma-separated 0/1 bucket bits.",
)
@click.option("--tolerance", type=float, default=estimation.DEFAULT_COR_TOLERANCE,
              show_default=True)
@_fail_on_runtime_error
def estimate_delta(series_path: str, tolerance: float):
    """Smallest day lag at which availability decorrelates."""
    with open(series_path, newline="") as fh:
        series = [[int(v) for v in row] for row in csv.reader(fh) if row]
    value = estimation.delta_hat(series, tolerance=tolerance)
    by_lag = estimation.mean_cor_by_lag(series)
    _print_json(
        {
            "delta_hat": value,
            "tolerance": tolerance,
            "mean_cor_by_lag": by_lag,
        }
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _load_config_overrides(config_path: str | None) -> dict:
    if config_path is None:
        return {}
    with open(config_path) as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise click.ClickException("config file must hold a JSON object")
    return overrides


@cli.group()
def simulate() -> None:
    """Monte Carlo studies."""


@simulate.command("sampling-dist")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON overrides of the study parameters.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--plot", is_flag=True, help="Render distribution figures too.")
@click.option("--record-timing", is_flag=True,
              help="Store wall-clock timestamps in run_meta.json (breaks byte-reproducibility).")
@_fail_on_runtime_error
def sampling_dist(config_path, seed, threads, out_dir, plot, record_timing):
    """Estimator and t-statistic distributions under unit vs bucket sampling."""
    overrides = _load_config_overrides(config_path)
    overrides["seed"] = seed
    try:
        cfg = simulation.SamplingSimConfig(**overrides)
    except TypeError as exc:
        raise click.ClickException(f"bad config key: {exc}") from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    result = simulation.run_sampling_distribution_sim(cfg, threads=threads)
    t1 = time.time()

    rows = []
    for strategy in simulation.STRATEGIES:
        est = result.estimates[strategy]
        tst = result.t_stats[strategy]
        for rep in range(cfg.replications):
            for s in range(cfg.samples_per_population):
                for a in range(cfg.assignments_per_sample):
                    rows.append(
                        (strategy, rep, s, a, est[rep, s, a], tst[rep, s, a])
                    )
    _write_csv(
        out / "draws.csv",
        ["strategy", "replication", "sample", "assignment", "estimate", "t_stat"],
        rows,
    )
    _write_run_meta(
        out / "run_meta.json",
        {**dataclasses.asdict(cfg), "threads": threads},
        seed,
        (t0, t1) if record_timing else None,
    )
    if plot:
        from . import figures

        figures.render_sampling_distributions(result, out / "distributions.png")


@simulate.command("program")
@click.option("--setting", type=click.Choice(
    [*(str(i) for i in range(1, 7)), *(f"appendix-{i}" for i in range(1, 7)), "custom"]
), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON overrides (required for --setting custom).")
@click.option("--paper-scale", is_flag=True,
              help="Keep the full 50 starting points x 10000 replications.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--plot", is_flag=True, help="Render the metric panels too.")
@click.option("--record-timing", is_flag=True,
              help="Store wall-clock timestamps in run_meta.json (breaks byte-reproducibility).")
@_fail_on_runtime_error
def program(setting, config_path, paper_scale, seed, threads, out_dir, plot, record_timing):
    """Dependency decay and day-one bias in an exclusive program."""
    overrides = _load_config_overrides(config_path)
    if setting == "custom":
        if not overrides:
            raise click.UsageError("--setting custom requires --config")
        base_fields = {}
    else:
        base_fields = dataclasses.asdict(simulation.settings_catalog()[setting])
    fields = {**base_fields, **overrides, "seed": seed}
    if "length_distribution" in fields:
        fields["length_distribution"] = tuple(fields["length_distribution"])
    if "size_distribution" in fields:
        fields["size_distribution"] = tuple(fields["size_distribution"])
    try:
        cfg = simulation.ProgramSimConfig(**fields)
    except TypeError as exc:
        raise click.ClickException(f"bad config key: {exc}") from exc
    if not paper_scale and "num_starting_points" not in overrides and "replications_per_start" not in overrides:
        cfg = simulation.desk_scale(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    series = simulation.run_program_sim(cfg, threads=threads)
    t1 = time.time()

    rows = [
        (
            setting,
            int(d),
            series.availability_cor_mean[i],
            series.sampling_cor_mean[i],
            series.ate1_bias_mean[i],
            series.ate1_bias_sd[i],
            int(series.n_effective[i]),
        )
        for i, d in enumerate(series.deltas)
    ]
    _write_csv(
        out / "metrics.csv",
        [
            "setting",
            "delta",
            "availability_cor_mean",
            "sampling_cor_mean",
            "ate1_bias_mean",
            "ate1_bias_sd",
            "n_effective",
        ],
        rows,
    )
    _write_run_meta(
        out / "run_meta.json",
        {**dataclasses.asdict(cfg), "setting": setting, "threads": threads},
        seed,
        (t0, t1) if record_timing else None,
    )
    if plot:
        from . import figures

        figures.render_program_metrics(
            series, out / "metrics.png", title=f"setting {setting}"
        )


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@_fail_on_runtime_error
def selftest(seed: int):
    """Run the exact enumeration oracles and identity checks."""
    failures = 0

    def report(name: str, ok: bool) -> None:
        nonlocal failures
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1

    rng = derive_rng(seed, STREAM_SCHEDULE, 999)
    for trial in range(5):
        b = int(rng.integers(3, 6))
        n_b = int(rng.integers(1, 4))
        picks = [k for k in range(1, b + 1) if (k * n_b) % 2 == 0]
        k = picks[rng.integers(len(picks))]
        times = 1
        y0 = rng.integers(-9, 10, size=(times, b * n_b))
        y1 = rng.integers(-9, 10, size=(times, b * n_b))
        pop = estimation.Population(
            bucket_of=np.arange(b * n_b) // n_b, y0=y0, y1=y1
        )
        mean, ate = estimation.enumerate_unbiasedness(pop, k, 0)
        report(f"unbiasedness oracle trial {trial} (B={b}, N_B={n_b}, k={k})", mean == ate)
        subset = int(rng.integers(k, b + 1))
        mean_r, ate_r = estimation.enumerate_restricted_unbiasedness(pop, subset, k, 0)
        report(
            f"restricted oracle trial {trial} (subset={subset})", mean_r == ate_r
        )

    ok = all(
        probability.counting_identities_check(b, k)
        for b in range(1, 21)
        for k in range(1, b + 1)
    )
    report("counting identity B<=20", ok)

    pmf_total = sum(
        probability.hypergeom_pmf(probability.HypergeomParams(40, 17, 12), x)
        for x in range(13)
    )
    report("pmf normalization", abs(pmf_total - 1.0) < 1e-12)

    if failures:
        raise click.ClickException(f"{failures} selftest check(s) failed")
    click.echo("selftest OK")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
