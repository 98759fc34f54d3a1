"""Utility metrics and the parameter-sweep experiment runner.

Metrics compare the published (noisy) entropies against the actual ones:

* KL divergence between the two entropy vectors viewed as distributions
  over locations (published vector P against actual vector Q). Values are
  floored at 0 and locations the mechanism did not publish contribute 0,
  then each vector is normalized to sum to one.
* Mean squared error between actual and noisy entropy, on raw values.
* Published ratio: published locations over locations eligible for
  publication (at least K visitors in the raw data).

"Throwaway" mode restricts both error metrics to the locations the
mechanism actually published instead of charging suppressed locations a
zero.
"""

from __future__ import annotations

import hashlib
import math
import os
import statistics
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .core import location_entropy
from .errors import ConfigurationError
from .mechanisms import (
    CheckinAggregate,
    PrivacyParams,
    PublicationRecord,
    _as_aggregate,
    publish,
)
from .sensitivity import SensitivityParams, SensitivityTable, precompute_smooth_sensitivity

__all__ = [
    "MetricReport",
    "SweepRow",
    "SWEEPABLE_PARAMS",
    "kl_divergence",
    "mse",
    "published_ratio",
    "run_sweep",
]

SWEEPABLE_PARAMS = ("epsilon", "C", "M", "k")


@dataclass(frozen=True)
class MetricReport:
    """One evaluation of a publication run."""

    kl_divergence: float
    mse: float
    published_ratio: float
    num_locations: int
    throwaway_mode: bool

    def __post_init__(self) -> None:
        if self.kl_divergence < 0 or self.mse < 0:
            raise ValueError("kl_divergence and mse must be non-negative")
        if not 0.0 <= self.published_ratio <= 1.0:
            raise ValueError("published_ratio must lie in [0, 1]")


def _as_entropy_map(values: Mapping[str, float] | Iterable[tuple[str, float]]) -> dict[str, float]:
    return dict(values)


def _aligned_locations(
    actual: dict[str, float], published: dict[str, float], throwaway: bool
) -> list[str]:
    extra = sorted(set(published) - set(actual))
    if extra:
        raise ValueError(
            f"published locations missing from the actual set: {', '.join(extra[:20])}"
            + (" ..." if len(extra) > 20 else "")
        )
    if not actual:
        raise ValueError("at least one location is required")
    if throwaway:
        locations = sorted(published)
        if not locations:
            raise ValueError("throwaway mode has no published locations to evaluate")
        return locations
    return sorted(actual)


def kl_divergence(
    actual: Mapping[str, float] | Iterable[tuple[str, float]],
    published: Mapping[str, float] | Iterable[tuple[str, float]],
    *,
    throwaway: bool = False,
) -> float:
    """KL divergence of the actual vector from the published one (nats).

    Both vectors are floored at 0; locations absent from ``published``
    count as 0 (suppression). After normalizing each vector to sum to 1,
    returns sum_i P_i ln(P_i / Q_i) with P the published and Q the actual
    distribution. A location where the actual mass is 0 but the published
    mass is positive makes the divergence infinite, which is reported as
    an error.
    """
    actual_map = _as_entropy_map(actual)
    published_map = _as_entropy_map(published)
    locations = _aligned_locations(actual_map, published_map, throwaway)
    p = [max(published_map.get(loc, 0.0), 0.0) for loc in locations]
    q = [max(actual_map[loc], 0.0) for loc in locations]
    p_sum = sum(p)
    q_sum = sum(q)
    if p_sum <= 0.0:
        raise ValueError("published entropies carry no mass after flooring at 0")
    if q_sum <= 0.0:
        raise ValueError("actual entropies carry no mass after flooring at 0")
    total = 0.0
    for loc, p_i, q_i in zip(locations, p, q):
        if p_i == 0.0:
            continue
        if q_i == 0.0:
            raise ValueError(
                f"infinite divergence: location {loc!r} has published mass but zero actual mass"
            )
        p_i /= p_sum
        q_i /= q_sum
        total += p_i * math.log(p_i / q_i)
    return max(total, 0.0)


def mse(
    actual: Mapping[str, float] | Iterable[tuple[str, float]],
    published: Mapping[str, float] | Iterable[tuple[str, float]],
    *,
    throwaway: bool = False,
) -> float:
    """Mean squared error between actual and noisy entropy.

    Uses raw noisy values (no flooring). By default suppressed locations
    contribute a noisy value of 0; in throwaway mode they are excluded
    from the mean.
    """
    actual_map = _as_entropy_map(actual)
    published_map = _as_entropy_map(published)
    locations = _aligned_locations(actual_map, published_map, throwaway)
    return statistics.fmean(
        (actual_map[loc] - published_map.get(loc, 0.0)) ** 2 for loc in locations
    )


def published_ratio(
    records: Sequence[PublicationRecord],
    eligibility_K: int,
    raw_user_counts: Mapping[str, int],
) -> float:
    """Published eligible locations over all eligible ones.

    A location is eligible when its raw (pre-capping) visitor count is at
    least ``eligibility_K``; the pre-capping counts must therefore be
    supplied alongside the records, which only carry post-capping counts.
    Only eligible locations enter the numerator, keeping the ratio in
    [0, 1] even when the publication threshold sits below K.
    """
    if eligibility_K < 1:
        raise ValueError("eligibility_K must be >= 1")
    eligible = sum(1 for count in raw_user_counts.values() if count >= eligibility_K)
    if eligible == 0:
        raise ValueError(f"no location has at least K={eligibility_K} users; ratio undefined")
    published_count = sum(
        1
        for record in records
        if record.published and raw_user_counts.get(record.location_id, 0) >= eligibility_K
    )
    return published_count / eligible


@dataclass(frozen=True)
class SweepRow:
    """One line of a sweep table; ``rep`` is a repetition index, ``mean``
    or ``stddev``."""

    param: str
    value: float
    rep: str
    kl: float
    mse: float
    published_ratio: float


def _cell_seed(seed: int, param: str, value: float, rep: int) -> int:
    label = f"{param}={value!r}|rep={rep}".encode("utf-8")
    digest = hashlib.blake2b(label, key=seed.to_bytes(8, "little"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def default_thread_count() -> int:
    """Worker cap for sweep cells, from ENTROPY_SENTRY_THREADS (default 1)."""
    raw = os.environ.get("ENTROPY_SENTRY_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigurationError(f"ENTROPY_SENTRY_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigurationError("ENTROPY_SENTRY_THREADS must be >= 1")
    return threads


def run_sweep(
    checkins,
    base_params: PrivacyParams,
    param: str,
    values: Sequence[float],
    repetitions: int = 20,
    *,
    throwaway: bool = False,
    threads: int = 1,
) -> list[SweepRow]:
    """Evaluate the configured mechanism across a parameter grid.

    For every grid value and repetition the mechanism runs with a fresh
    noise substream keyed by (seed, value, repetition), so cells are
    independent and the full table is deterministic regardless of worker
    count. Each value's repetition rows are followed by ``mean`` and
    ``stddev`` aggregate rows.
    """
    if param not in SWEEPABLE_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEPABLE_PARAMS}, got {param!r}")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    aggregate = _as_aggregate(checkins)
    raw_table = aggregate.raw_visit_table()
    actual = {loc: location_entropy(raw_table[loc]) for loc in raw_table}
    raw_counts = aggregate.raw_user_counts()
    ss_tables: dict[tuple[int, float], SensitivityTable] = {}

    def ss_table_for(params: PrivacyParams) -> SensitivityTable | None:
        if params.mechanism != "limit-ss":
            return None
        key = (params.C, params.beta)
        table = ss_tables.get(key)
        if table is None:
            capped = aggregate.truncated_table(params.C, params.M)
            n_max = max((len(capped[loc]) for loc in capped), default=1)
            table = precompute_smooth_sensitivity(
                SensitivityParams(
                    C=params.C, epsilon=params.epsilon, delta=params.delta,
                    xi=params.xi, N=n_max,
                )
            )
            ss_tables[key] = table
        return table

    def run_cell(value: float, rep: int) -> SweepRow:
        cast = float(value) if param == "epsilon" else int(value)
        params = replace(
            base_params,
            seed=_cell_seed(base_params.seed, param, value, rep),
            **{param: cast},
        )
        records = publish(aggregate, params, ss_table_for(params))
        published_map = {r.location_id: r.noisy_entropy for r in records if r.published}
        return SweepRow(
            param=param,
            value=float(value),
            rep=str(rep),
            kl=kl_divergence(actual, published_map, throwaway=throwaway),
            mse=mse(actual, published_map, throwaway=throwaway),
            published_ratio=published_ratio(records, params.eligibility_K, raw_counts),
        )

    rows: list[SweepRow] = []
    for value in values:
        # Build this value's capped table (and table cache) up front so
        # worker threads only race on reads.
        cast = float(value) if param == "epsilon" else int(value)
        probe = replace(base_params, **{param: cast})
        aggregate.truncated_table(probe.C, probe.M)
        ss_table_for(probe)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cell_rows = list(pool.map(lambda rep: run_cell(value, rep), range(repetitions)))
        else:
            cell_rows = [run_cell(value, rep) for rep in range(repetitions)]
        rows.extend(cell_rows)
        kls = [row.kl for row in cell_rows]
        mses = [row.mse for row in cell_rows]
        ratios = [row.published_ratio for row in cell_rows]
        for label, reducer in (("mean", statistics.fmean), ("stddev", _sample_stddev)):
            rows.append(
                SweepRow(
                    param=param,
                    value=float(value),
                    rep=label,
                    kl=reducer(kls),
                    mse=reducer(mses),
                    published_ratio=reducer(ratios),
                )
            )
    return rows


def _sample_stddev(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values)
