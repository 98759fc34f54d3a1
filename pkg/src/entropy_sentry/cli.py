"""Batch command-line driver.

Subcommands wire generation, sensitivity precomputation, publication and
evaluation into reproducible runs: every command writes a JSON manifest
next to its primary output recording the resolved parameters, paths and
seed, and re-running the same command reproduces the outputs byte for
byte.

Exit codes: 0 on success, 2 for usage errors, 1 for runtime errors
(reported as a single ``error: ...`` line on stderr).
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import __version__
from . import dataio
from .errors import EntropySentryError
from .evaluation import (
    MetricReport,
    default_thread_count,
    kl_divergence,
    mse,
    published_ratio,
    run_sweep,
)
from .mechanisms import MECHANISMS, PrivacyParams, publish
from .sensitivity import SensitivityParams, precompute_smooth_sensitivity


def _runtime_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (EntropySentryError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _manifest_path(output: Path) -> Path:
    return output.parent / (output.name + ".manifest.json")


@click.group()
@click.version_option(version=__version__, prog_name="entropy-sentry")
def main() -> None:
    """Differentially private publication of location entropy."""


@main.command()
@click.option("--preset", type=click.Choice(sorted(dataio.GENERATOR_PRESETS)), default=None,
              help="Dataset shape preset; individual knobs override it.")
@click.option("--locations", type=int, default=None, help="Number of distinct locations.")
@click.option("--users", type=int, default=None, help="Number of distinct users.")
@click.option("--visits", type=int, default=None, help="Total number of visit events.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_runtime_errors
def generate(preset, locations, users, visits, seed, output):
    """Write a synthetic check-in file."""
    shape = dict(dataio.GENERATOR_PRESETS[preset]) if preset else {}
    overrides = {"num_locations": locations, "num_users": users, "total_visits": visits}
    shape.update({name: value for name, value in overrides.items() if value is not None})
    missing = {"num_locations", "num_users", "total_visits"} - set(shape)
    if missing:
        raise click.UsageError(
            "either --preset or all of --locations/--users/--visits must be given"
        )
    config = dataio.GeneratorConfig(seed=seed, **shape)
    dataio.write_checkins(dataio.generate_synthetic(config), output)
    dataio.write_manifest(
        _manifest_path(output),
        command="generate",
        parameters={
            "preset": preset,
            "num_locations": config.num_locations,
            "num_users": config.num_users,
            "total_visits": config.total_visits,
            "seed": config.seed,
        },
        inputs={},
        outputs={"checkins": str(output)},
        version=__version__,
    )


@main.command()
@click.option("--C", "cap", type=int, default=5, show_default=True,
              help="Visit cap per user per location.")
@click.option("--epsilon", type=float, default=5.0, show_default=True)
@click.option("--delta", type=float, default=1e-8, show_default=True)
@click.option("--xi", type=float, default=1e-3, show_default=True,
              help="Tolerance below which the smoothed bound is floored.")
@click.option("--N", "n_max", type=int, default=100_000, show_default=True,
              help="Largest visitor count tabulated.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--curve", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Bound-curve output path (default: <output>.curve.csv).")
@_runtime_errors
def sensitivity(cap, epsilon, delta, xi, n_max, output, curve):
    """Precompute the smoothed sensitivity table and bound curves."""
    params = SensitivityParams(C=cap, epsilon=epsilon, delta=delta, xi=xi, N=n_max)
    table = precompute_smooth_sensitivity(params)
    dataio.write_sensitivity_table(table, output)
    curve_path = curve if curve is not None else output.parent / (output.name + ".curve.csv")
    dataio.write_bound_curve(table, curve_path)
    dataio.write_manifest(
        _manifest_path(output),
        command="sensitivity",
        parameters={"C": cap, "epsilon": epsilon, "delta": delta, "xi": xi, "N": n_max},
        inputs={},
        outputs={"table": str(output), "curve": str(curve_path)},
        version=__version__,
    )


_MECHANISM_OPTIONS = [
    click.option("--mechanism", type=click.Choice(MECHANISMS), required=True),
    click.option("--epsilon", type=float, default=5.0, show_default=True),
    click.option("--delta", type=float, default=1e-8, show_default=True),
    click.option("--xi", type=float, default=1e-3, show_default=True),
    click.option("--C", "cap_c", type=int, default=5, show_default=True,
                 help="Visit cap per user per location."),
    click.option("--M", "cap_m", type=int, default=5, show_default=True,
                 help="Location cap per user."),
    click.option("--k", "threshold_k", type=int, default=50, show_default=True,
                 help="Minimum visitors for crowd-blending publication."),
    click.option("--eligibility-K", "eligibility_k", type=int, default=20, show_default=True,
                 help="Minimum raw visitors for a location to count as eligible."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--noise", type=click.Choice(["on", "off"]), default="on", show_default=True,
                 help="off releases exact entropies (audit only, NOT private)."),
]


def _with_mechanism_options(func):
    for option in reversed(_MECHANISM_OPTIONS):
        func = option(func)
    return func


def _build_params(mechanism, epsilon, delta, xi, cap_c, cap_m, threshold_k,
                  eligibility_k, seed, noise) -> PrivacyParams:
    if noise == "off":
        click.echo(
            "WARNING: noise disabled; the output is NOT differentially private",
            err=True,
        )
    return PrivacyParams(
        epsilon=epsilon,
        delta=delta,
        xi=xi,
        C=cap_c,
        M=cap_m,
        k=threshold_k,
        eligibility_K=eligibility_k,
        mechanism=mechanism,
        seed=seed,
        noise_enabled=noise == "on",
    )


def _params_manifest(params: PrivacyParams) -> dict:
    return {
        "mechanism": params.mechanism,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "xi": params.xi,
        "C": params.C,
        "M": params.M,
        "k": params.k,
        "eligibility_K": params.eligibility_K,
        "seed": params.seed,
        "noise_enabled": params.noise_enabled,
    }


@main.command(name="publish")
@_with_mechanism_options
@click.option("--ss-table", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Precomputed sensitivity table (limit-ss).")
@click.option("-i", "--input", "input_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_runtime_errors
def publish_cmd(mechanism, epsilon, delta, xi, cap_c, cap_m, threshold_k, eligibility_k,
                seed, noise, ss_table, input_path, output):
    """Publish noisy location entropies from a check-in file."""
    params = _build_params(mechanism, epsilon, delta, xi, cap_c, cap_m, threshold_k,
                           eligibility_k, seed, noise)
    table = dataio.read_sensitivity_table(ss_table) if ss_table is not None else None
    records = publish(dataio.parse_checkins(input_path), params, table)
    dataio.write_publication(records, output)
    dataio.write_manifest(
        _manifest_path(output),
        command="publish",
        parameters=_params_manifest(params),
        inputs={"checkins": str(input_path),
                **({"ss_table": str(ss_table)} if ss_table else {})},
        outputs={"publication": str(output)},
        version=__version__,
    )


@main.command(name="eval")
@click.option("--actual", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Publication file carrying the actual entropies.")
@click.option("--published", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Publication file produced by a mechanism run.")
@click.option("--throwaway", is_flag=True, default=False,
              help="Evaluate only the locations the mechanism published.")
@click.option("--eligibility-K", "eligibility_k", type=int, default=20, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_runtime_errors
def eval_cmd(actual, published, throwaway, eligibility_k, output):
    """Compare a published run against actual entropies.

    The actual file is typically a ``publish --mechanism baseline
    --noise off`` run: its true-entropy column and raw visitor counts
    define the reference.
    """
    actual_records = dataio.read_publication(actual)
    published_records = dataio.read_publication(published)
    actual_map = {r.location_id: r.true_entropy for r in actual_records}
    published_map = {
        r.location_id: r.noisy_entropy for r in published_records if r.published
    }
    raw_counts = {r.location_id: r.n_users for r in actual_records}
    report = MetricReport(
        kl_divergence=kl_divergence(actual_map, published_map, throwaway=throwaway),
        mse=mse(actual_map, published_map, throwaway=throwaway),
        published_ratio=published_ratio(published_records, eligibility_k, raw_counts),
        num_locations=len(actual_map),
        throwaway_mode=throwaway,
    )
    dataio.write_metric_report(report, output)
    dataio.write_manifest(
        _manifest_path(output),
        command="eval",
        parameters={"throwaway": throwaway, "eligibility_K": eligibility_k},
        inputs={"actual": str(actual), "published": str(published)},
        outputs={"report": str(output)},
        version=__version__,
    )


@main.command(name="sweep")
@_with_mechanism_options
@click.option("--param", type=click.Choice(["epsilon", "C", "M", "k"]), required=True)
@click.option("--grid", required=True, help="Comma-separated parameter values.")
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--throwaway", is_flag=True, default=False)
@click.option("-i", "--input", "input_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_runtime_errors
def sweep_cmd(mechanism, epsilon, delta, xi, cap_c, cap_m, threshold_k, eligibility_k,
              seed, noise, param, grid, reps, throwaway, input_path, output):
    """Run the mechanism across a parameter grid and tabulate metrics."""
    params = _build_params(mechanism, epsilon, delta, xi, cap_c, cap_m, threshold_k,
                           eligibility_k, seed, noise)
    try:
        if param == "epsilon":
            values = [float(v) for v in grid.split(",") if v.strip()]
        else:
            values = [int(v) for v in grid.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"--grid must be a comma-separated list of numbers, got {grid!r}")
    if not values:
        raise click.UsageError("--grid must contain at least one value")
    rows = run_sweep(
        dataio.parse_checkins(input_path),
        params,
        param,
        values,
        repetitions=reps,
        throwaway=throwaway,
        threads=default_thread_count(),
    )
    dataio.write_sweep_table(rows, output)
    dataio.write_manifest(
        _manifest_path(output),
        command="sweep",
        parameters={**_params_manifest(params), "param": param, "grid": values,
                    "reps": reps, "throwaway": throwaway},
        inputs={"checkins": str(input_path)},
        outputs={"sweep": str(output)},
        version=__version__,
    )


if __name__ == "__main__":
    main()
