"""Publication mechanisms: calibrated-noise release of per-location entropy.

Four mechanisms share one preprocessing pipeline (cap each user at M
locations, then cap each per-location visit count at C) and differ in how
the Laplace noise scale is calibrated:

* ``baseline``  - no capping; scale from the dataset-measured worst case.
* ``limit``     - capped pipeline; scale M * GS(C) / epsilon.
* ``limit-ss``  - capped pipeline; per-location scale from a precomputed
  smoothed-sensitivity table, M * 2 * SS(C, n) / epsilon.
* ``limit-cb``  - capped pipeline; locations with fewer than k visitors
  are suppressed, the rest use scale M * LS(k, C) / epsilon.

Noise is drawn from an independent per-location stream keyed by
(seed, location_id), so output is deterministic and adding or removing
locations never shifts another location's draw.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .core import CheckIn, VisitTable, location_entropy
from .errors import ConfigurationError
from .sensitivity import SensitivityTable, crowd_blend_sensitivity, global_sensitivity

__all__ = [
    "MECHANISMS",
    "PrivacyParams",
    "PublicationRecord",
    "CheckinAggregate",
    "truncate_locations",
    "clamp_visits",
    "laplace_sample",
    "location_noise_rng",
    "publish",
    "publish_baseline",
    "publish_limit",
    "publish_limit_ss",
    "publish_limit_cb",
]

MECHANISMS = ("baseline", "limit", "limit-ss", "limit-cb")


@dataclass(frozen=True)
class PrivacyParams:
    """Resolved knobs of one publication run.

    ``eligibility_K`` is an evaluation-side notion (minimum visitors for a
    location to count as eligible in the published ratio) and is distinct
    from the crowd-blending publication threshold ``k``.
    ``noise_enabled=False`` is a test/audit hook: entropies are released
    exactly, with noise_scale reported as 0, and the output is NOT private.
    """

    epsilon: float = 5.0
    delta: float = 1e-8
    xi: float = 1e-3
    C: int = 5
    M: int = 5
    k: int = 50
    eligibility_K: int = 20
    mechanism: str = "limit"
    seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        for name in ("C", "M", "k", "eligibility_K"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def beta(self) -> float:
        return self.epsilon / (2.0 * math.log(2.0 / self.delta))


@dataclass(slots=True)
class PublicationRecord:
    """Per-location output of a publication run.

    ``n_users`` and ``true_entropy`` reflect the mechanism's capped table,
    not the raw data. Suppressed locations carry ``published=False``, no
    noisy entropy, and a zero noise scale.
    """

    location_id: str
    n_users: int
    true_entropy: float
    noisy_entropy: float | None
    published: bool
    noise_scale: float


class CheckinAggregate:
    """Single-pass summary of a check-in stream, reusable across settings.

    Stores, per user and location, the visit count and the first-visit
    instant - everything the pipeline needs - so sweeps over C, M,
    epsilon or seeds never re-read the stream. Capped tables are memoized
    per (C, M).
    """

    __slots__ = ("_per_user", "_truncated_cache")

    def __init__(self, per_user: dict[str, dict[str, list]]):
        self._per_user = per_user
        self._truncated_cache: dict[tuple[int, int], VisitTable] = {}

    @classmethod
    def from_checkins(cls, checkins: Iterable[CheckIn]) -> "CheckinAggregate":
        per_user: dict[str, dict[str, list]] = {}
        for row, checkin in enumerate(checkins):
            if not checkin.user_id or not checkin.location_id:
                raise ValueError(f"check-in row {row}: user_id and location_id must be non-empty")
            locations = per_user.get(checkin.user_id)
            if locations is None:
                locations = {}
                per_user[checkin.user_id] = locations
            entry = locations.get(checkin.location_id)
            if entry is None:
                locations[checkin.location_id] = [1, checkin.timestamp]
            else:
                entry[0] += 1
                if checkin.timestamp < entry[1]:
                    entry[1] = checkin.timestamp
        return cls(per_user)

    @property
    def num_users(self) -> int:
        return len(self._per_user)

    def raw_visit_table(self) -> VisitTable:
        """Visit counts with no capping applied."""
        per_location: dict[str, dict[str, int]] = {}
        for user_id, locations in self._per_user.items():
            for location_id, (count, _first) in locations.items():
                per_location.setdefault(location_id, {})[user_id] = count
        return VisitTable._unchecked(per_location)

    def raw_user_counts(self) -> dict[str, int]:
        """Distinct visitors per location before any capping."""
        counts: dict[str, int] = {}
        for locations in self._per_user.values():
            for location_id in locations:
                counts[location_id] = counts.get(location_id, 0) + 1
        return counts

    def truncated_table(self, C: int, M: int) -> VisitTable:
        """Visit counts after keeping each user's first M locations and
        capping every count at C.

        A user's locations are ordered by first-visit instant, ties broken
        by ascending location id. Locations that lose all their visitors
        are absent from the result.
        """
        if C < 1 or M < 1:
            raise ValueError("C and M must be >= 1")
        cached = self._truncated_cache.get((C, M))
        if cached is not None:
            return cached
        per_location: dict[str, dict[str, int]] = {}
        for user_id, locations in self._per_user.items():
            if len(locations) > M:
                ranked = sorted(locations.items(), key=lambda item: (item[1][1], item[0]))
                kept = ranked[:M]
            else:
                kept = list(locations.items())
            for location_id, (count, _first) in kept:
                per_location.setdefault(location_id, {})[user_id] = count if count <= C else C
        table = VisitTable._unchecked(per_location)
        self._truncated_cache[(C, M)] = table
        return table


def _as_aggregate(checkins: Iterable[CheckIn] | CheckinAggregate) -> CheckinAggregate:
    if isinstance(checkins, CheckinAggregate):
        return checkins
    return CheckinAggregate.from_checkins(checkins)


def truncate_locations(checkins: Sequence[CheckIn], M: int) -> list[CheckIn]:
    """Keep, per user, only the visits to their first M distinct locations.

    "First" means earliest first-visit instant, with ties broken by
    ascending location id. All visits to retained locations survive, in
    their original order.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    first_seen: dict[str, dict[str, object]] = {}
    for checkin in checkins:
        locations = first_seen.setdefault(checkin.user_id, {})
        first = locations.get(checkin.location_id)
        if first is None or checkin.timestamp < first:
            locations[checkin.location_id] = checkin.timestamp
    kept: dict[str, set[str]] = {}
    for user_id, locations in first_seen.items():
        if len(locations) <= M:
            kept[user_id] = set(locations)
        else:
            ranked = sorted(locations.items(), key=lambda item: (item[1], item[0]))
            kept[user_id] = {location_id for location_id, _ in ranked[:M]}
    return [ci for ci in checkins if ci.location_id in kept[ci.user_id]]


def clamp_visits(table: VisitTable, C: int) -> VisitTable:
    """Cap every per-user visit count at C; users and locations unchanged."""
    if C < 1:
        raise ValueError("C must be >= 1")
    return VisitTable._unchecked(
        {
            location_id: {u: (c if c <= C else C) for u, c in counts.items()}
            for location_id, counts in table.items()
        }
    )


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    """One draw from the centered Laplace distribution with the given scale.

    Inverse-CDF on a single uniform, so the value is a deterministic
    function of the stream state.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    u = rng.random()
    while u == 0.0:  # open interval: log below needs u > 0
        u = rng.random()
    if u < 0.5:
        return scale * math.log(2.0 * u)
    return -scale * math.log(2.0 * (1.0 - u))


def location_noise_rng(seed: int, location_id: str) -> np.random.Generator:
    """Independent noise stream for one location, keyed by (seed, location).

    Derived with a keyed hash so that the draw for a location never
    depends on which other locations exist.
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    digest = hashlib.blake2b(
        location_id.encode("utf-8"), key=seed.to_bytes(8, "little"), digest_size=16
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def _release(
    table: VisitTable,
    params: PrivacyParams,
    scale_for: Callable[[int], float],
    publish_if: Callable[[int], bool] = lambda n: True,
) -> list[PublicationRecord]:
    records = []
    for location_id in sorted(table):
        counts = table[location_id]
        n = len(counts)
        h = location_entropy(counts)
        if not publish_if(n):
            records.append(PublicationRecord(location_id, n, h, None, False, 0.0))
            continue
        scale = scale_for(n)
        if params.noise_enabled:
            noisy = h + laplace_sample(scale, location_noise_rng(params.seed, location_id))
        else:
            noisy = h
            scale = 0.0
        records.append(PublicationRecord(location_id, n, h, noisy, True, scale))
    return records


def publish_baseline(table: VisitTable, params: PrivacyParams) -> list[PublicationRecord]:
    """Release every location's entropy with worst-case calibration.

    The visit cap C_max and the per-user location count M_max are measured
    from the table itself (and treated as public); the common noise scale
    is M_max * GS(C_max) / epsilon. No capping is applied to the data.
    """
    if len(table) == 0:
        raise ValueError("cannot publish from an empty visit table")
    c_max = 0
    locations_per_user: dict[str, int] = {}
    for location_id in table:
        for user_id, count in table[location_id].items():
            if count > c_max:
                c_max = count
            locations_per_user[user_id] = locations_per_user.get(user_id, 0) + 1
    m_max = max(locations_per_user.values())
    scale = m_max * global_sensitivity(c_max) / params.epsilon
    return _release(table, params, lambda n: scale)


def publish_limit(
    checkins: Iterable[CheckIn] | CheckinAggregate, params: PrivacyParams
) -> list[PublicationRecord]:
    """Release entropies of the capped table at scale M * GS(C) / epsilon.

    Locations emptied by the per-user location cap are absent from the
    output.
    """
    table = _as_aggregate(checkins).truncated_table(params.C, params.M)
    scale = params.M * global_sensitivity(params.C) / params.epsilon
    return _release(table, params, lambda n: scale)


def publish_limit_ss(
    checkins: Iterable[CheckIn] | CheckinAggregate,
    params: PrivacyParams,
    ss_table: SensitivityTable,
) -> list[PublicationRecord]:
    """Release capped entropies with per-location smoothed calibration.

    The noise scale for a location with n visitors is
    M * 2 * SS(C, n) / epsilon, looked up in the precomputed table. The
    table must have been built for the same C and the same smoothing rate
    beta = epsilon / (2 ln(2/delta)); a location whose visitor count
    exceeds the table range raises, instructing recomputation with a
    larger N.
    """
    if ss_table.C != params.C:
        raise ConfigurationError(
            f"sensitivity table was built for C={ss_table.C}, run requests C={params.C}"
        )
    if not math.isclose(ss_table.beta, params.beta, rel_tol=1e-9):
        raise ConfigurationError(
            f"sensitivity table smoothing rate beta={ss_table.beta!r} does not match "
            f"epsilon/delta of the run (beta={params.beta!r}); recompute the table"
        )
    table = _as_aggregate(checkins).truncated_table(params.C, params.M)
    factor = params.M * 2.0 / params.epsilon
    return _release(table, params, lambda n: factor * ss_table.ss(n))


def publish_limit_cb(
    checkins: Iterable[CheckIn] | CheckinAggregate, params: PrivacyParams
) -> list[PublicationRecord]:
    """Release capped entropies only for locations with at least k visitors.

    Smaller locations are emitted with ``published=False`` and no noisy
    value. Published locations share the scale M * LS(k, C) / epsilon,
    which requires k to satisfy the crowd-blending admissibility condition
    for C (checked before any data is touched).
    """
    bound = crowd_blend_sensitivity(params.k, params.C)
    table = _as_aggregate(checkins).truncated_table(params.C, params.M)
    scale = params.M * bound / params.epsilon
    return _release(table, params, lambda n: scale, publish_if=lambda n: n >= params.k)


def publish(
    checkins: Iterable[CheckIn] | CheckinAggregate,
    params: PrivacyParams,
    ss_table: SensitivityTable | None = None,
) -> list[PublicationRecord]:
    """Run the mechanism named by ``params.mechanism``."""
    mechanism = params.mechanism
    if mechanism == "baseline":
        return publish_baseline(_as_aggregate(checkins).raw_visit_table(), params)
    if mechanism == "limit":
        return publish_limit(checkins, params)
    if mechanism == "limit-ss":
        if ss_table is None:
            raise ConfigurationError("limit-ss requires a precomputed sensitivity table")
        return publish_limit_ss(checkins, params, ss_table)
    if mechanism == "limit-cb":
        return publish_limit_cb(checkins, params)
    raise ValueError(f"unknown mechanism {mechanism!r}")
