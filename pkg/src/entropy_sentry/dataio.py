"""File formats, check-in ingestion, and synthetic data generation.

Check-in files are tab-separated with five fields and no header:

    user_id <TAB> ISO-8601 UTC timestamp <TAB> lat <TAB> lon <TAB> location_id

Publication files are CSV with the header
``location_id,n_users,true_entropy,noisy_entropy,published,noise_scale``;
unpublished rows leave the noisy field empty. Floats are printed at 17
significant digits, which round-trips doubles exactly. All writers go
through a temp-file-plus-rename so output files appear atomically.
"""

from __future__ import annotations

import csv
import json
import os
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO

import numpy as np

from .core import CheckIn
from .errors import ParseError
from .evaluation import MetricReport, SweepRow
from .mechanisms import PublicationRecord
from .sensitivity import SensitivityTable, global_sensitivity, local_sensitivity

__all__ = [
    "GeneratorConfig",
    "GENERATOR_PRESETS",
    "preset_config",
    "generate_synthetic",
    "parse_checkins",
    "write_checkins",
    "write_publication",
    "read_publication",
    "write_sensitivity_table",
    "read_sensitivity_table",
    "write_bound_curve",
    "write_metric_report",
    "write_sweep_table",
    "write_manifest",
]

_GENERATION_CHUNK = 1_000_000


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of one synthetic check-in dataset."""

    num_locations: int
    num_users: int
    total_visits: int
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_locations", "num_users", "total_visits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


# Desk-scale presets: a sparse crowd (few visitors per location) and a
# dense one (locations shared by many visitors).
GENERATOR_PRESETS: dict[str, dict[str, int]] = {
    "sparse-scaled": {"num_locations": 1_000, "num_users": 10_000, "total_visits": 1_000_000},
    "dense-scaled": {"num_locations": 1_000, "num_users": 1_000_000, "total_visits": 10_000_000},
}


def preset_config(name: str, seed: int = 0) -> GeneratorConfig:
    try:
        shape = GENERATOR_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; expected one of {sorted(GENERATOR_PRESETS)}"
        ) from None
    return GeneratorConfig(seed=seed, **shape)


def _reciprocal_cdf(size: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, size + 1, dtype=np.float64)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return cdf


def generate_synthetic(config: GeneratorConfig) -> Iterator[CheckIn]:
    """Yield ``total_visits`` synthetic check-ins, deterministically per seed.

    Each event independently draws a location with probability
    proportional to 1/x for id rank x, and a user with probability
    proportional to 1/y for id rank y (inverse-CDF over precomputed
    cumulative weights). Low-rank ids therefore dominate, mimicking the
    skew of real check-in data. Timestamps are consecutive seconds.
    """
    rng = np.random.default_rng(config.seed)
    location_cdf = _reciprocal_cdf(config.num_locations)
    user_cdf = _reciprocal_cdf(config.num_users)
    loc_width = len(str(config.num_locations))
    user_width = len(str(config.num_users))
    emitted = 0
    while emitted < config.total_visits:
        n = min(_GENERATION_CHUNK, config.total_visits - emitted)
        locations = np.searchsorted(location_cdf, rng.random(n), side="right")
        users = np.searchsorted(user_cdf, rng.random(n), side="right")
        for i in range(n):
            t = emitted + i
            yield CheckIn(
                user_id=f"u{users[i] + 1:0{user_width}d}",
                location_id=f"l{locations[i] + 1:0{loc_width}d}",
                timestamp=datetime.fromtimestamp(t, tz=timezone.utc),
            )
        emitted += n


def _parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    stamp = datetime.fromisoformat(raw)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp


def parse_checkins(source: str | Path | IO[str]) -> Iterator[CheckIn]:
    """Parse a check-in file (or open text stream), preserving row order.

    Yields lazily so arbitrarily large files stream through aggregation
    without being materialized. A malformed row raises :class:`ParseError`
    naming the source and line number; an empty file yields nothing.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            yield from _parse_stream(handle, str(source))
    else:
        yield from _parse_stream(source, getattr(source, "name", "<stream>"))


def _parse_stream(handle: IO[str], name: str) -> Iterator[CheckIn]:
    for lineno, line in enumerate(handle, start=1):
        line = line.rstrip("\n").rstrip("\r")
        fields = line.split("\t")
        if len(fields) != 5:
            raise ParseError(f"{name}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
        user_id, stamp_text, lat_text, lon_text, location_id = fields
        try:
            timestamp = _parse_timestamp(stamp_text)
            lat = float(lat_text) if lat_text.strip() else None
            lon = float(lon_text) if lon_text.strip() else None
            yield CheckIn(user_id, location_id, timestamp, lat, lon)
        except ValueError as exc:
            raise ParseError(f"{name}:{lineno}: {exc}") from exc


@contextmanager
def _atomic_writer(path: str | Path) -> Iterator[IO[str]]:
    path = Path(path)
    tmp = path.parent / f".{path.name}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _format_timestamp(stamp: datetime) -> str:
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(timezone.utc)
    else:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def _g17(value: float) -> str:
    return format(value, ".17g")


def write_checkins(checkins: Iterable[CheckIn], path: str | Path) -> None:
    """Write check-ins in the tab-separated input format, streaming."""
    with _atomic_writer(path) as handle:
        for checkin in checkins:
            lat = "" if checkin.lat is None else repr(checkin.lat)
            lon = "" if checkin.lon is None else repr(checkin.lon)
            handle.write(
                f"{checkin.user_id}\t{_format_timestamp(checkin.timestamp)}"
                f"\t{lat}\t{lon}\t{checkin.location_id}\n"
            )


_PUBLICATION_HEADER = ["location_id", "n_users", "true_entropy", "noisy_entropy", "published", "noise_scale"]


def write_publication(records: Iterable[PublicationRecord], path: str | Path) -> None:
    """Write publication records as CSV, sorted by location id."""
    with _atomic_writer(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_PUBLICATION_HEADER)
        for record in sorted(records, key=lambda r: r.location_id):
            writer.writerow(
                [
                    record.location_id,
                    record.n_users,
                    _g17(record.true_entropy),
                    "" if record.noisy_entropy is None else _g17(record.noisy_entropy),
                    "true" if record.published else "false",
                    _g17(record.noise_scale),
                ]
            )


def read_publication(path: str | Path) -> list[PublicationRecord]:
    """Read a publication CSV back into records."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _PUBLICATION_HEADER:
            raise ParseError(f"{path}:1: unexpected publication header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise ParseError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                records.append(
                    PublicationRecord(
                        location_id=row[0],
                        n_users=int(row[1]),
                        true_entropy=float(row[2]),
                        noisy_entropy=float(row[3]) if row[3] else None,
                        published=row[4] == "true",
                        noise_scale=float(row[5]),
                    )
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_sensitivity_table(table: SensitivityTable, path: str | Path) -> None:
    """Write a precomputed sensitivity table.

    Format: a ``C,beta,xi,N`` header line, the corresponding values on the
    next line, then one ``n,ss_value`` row per n with the value at 17
    significant digits.
    """
    with _atomic_writer(path) as handle:
        handle.write("C,beta,xi,N\n")
        handle.write(f"{table.C},{_g17(table.beta)},{_g17(table.xi)},{table.N}\n")
        for i, value in enumerate(table.values):
            handle.write(f"{i + 1},{_g17(float(value))}\n")


def read_sensitivity_table(path: str | Path) -> SensitivityTable:
    """Read a sensitivity table written by :func:`write_sensitivity_table`.

    The floor marker is reconstructed from the trailing run of entries
    equal to xi (the file format does not store it explicitly).
    """
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        if header != "C,beta,xi,N":
            raise ParseError(f"{path}:1: unexpected table header {header!r}")
        meta = handle.readline().strip().split(",")
        if len(meta) != 4:
            raise ParseError(f"{path}:2: expected 4 metadata fields, got {len(meta)}")
        try:
            C, beta, xi, n_max = int(meta[0]), float(meta[1]), float(meta[2]), int(meta[3])
        except ValueError as exc:
            raise ParseError(f"{path}:2: {exc}") from exc
        values = np.empty(n_max, dtype=np.float64)
        seen = 0
        for lineno, line in enumerate(handle, start=3):
            fields = line.strip().split(",")
            if len(fields) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            try:
                n, value = int(fields[0]), float(fields[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if n != seen + 1:
                raise ParseError(f"{path}:{lineno}: rows must cover n=1..N in order, got n={n}")
            values[n - 1] = value
            seen = n
    if seen != n_max:
        raise ParseError(f"{path}: expected {n_max} rows, got {seen}")
    run = 0
    while run < n_max and values[n_max - 1 - run] == xi:
        run += 1
    floor_from = n_max - run if 0 < run < n_max else None
    return SensitivityTable(C=C, beta=beta, xi=xi, values=values, floor_from=floor_from)


def write_bound_curve(table: SensitivityTable, path: str | Path) -> None:
    """Write per-n bound curves for plotting.

    Columns: n, the local bound, the smoothed bound from ``table``, and
    the (constant) global bound.
    """
    gs = global_sensitivity(table.C)
    with _atomic_writer(path) as handle:
        handle.write("n,local_sensitivity,smooth_sensitivity,global_sensitivity\n")
        for i, value in enumerate(table.values):
            n = i + 1
            handle.write(
                f"{n},{_g17(local_sensitivity(n, table.C))},{_g17(float(value))},{_g17(gs)}\n"
            )


def write_metric_report(report: MetricReport, path: str | Path) -> None:
    """Write one evaluation report as a single-row CSV."""
    with _atomic_writer(path) as handle:
        handle.write("kl,mse,published_ratio,num_locations,throwaway_mode\n")
        handle.write(
            f"{_g17(report.kl_divergence)},{_g17(report.mse)},"
            f"{_g17(report.published_ratio)},{report.num_locations},"
            f"{'true' if report.throwaway_mode else 'false'}\n"
        )


def write_sweep_table(rows: Iterable[SweepRow], path: str | Path) -> None:
    """Write sweep results; aggregate rows use rep = mean / stddev."""
    with _atomic_writer(path) as handle:
        handle.write("param,value,rep,kl,mse,published_ratio\n")
        for row in rows:
            handle.write(
                f"{row.param},{_g17(row.value)},{row.rep},"
                f"{_g17(row.kl)},{_g17(row.mse)},{_g17(row.published_ratio)}\n"
            )


def write_manifest(
    path: str | Path,
    command: str,
    parameters: dict,
    inputs: dict[str, str],
    outputs: dict[str, str],
    version: str,
) -> None:
    """Write the run manifest (JSON, key-sorted, byte-deterministic)."""
    payload = {
        "command": command,
        "version": version,
        "parameters": parameters,
        "inputs": inputs,
        "outputs": outputs,
    }
    with _atomic_writer(path) as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
