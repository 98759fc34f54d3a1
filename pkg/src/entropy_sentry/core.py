"""Check-in data model and exact location-entropy math.

Location entropy measures how evenly a location's visits are spread over
its visitors: for visit counts c_u with total S, H = -sum_u (c_u/S) ln(c_u/S).
The natural logarithm is used throughout; all entropies are in nats, so a
location with n visitors satisfies 0 <= H <= ln(n).

Everything in this module is a pure function of its inputs and safe to use
from multiple threads; :class:`VisitTable` is immutable after construction.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from datetime import datetime
from types import MappingProxyType

__all__ = [
    "CheckIn",
    "VisitTable",
    "count_visits",
    "location_entropy",
    "entropy_add_user",
    "entropy_remove_user",
    "max_entropy",
]


@dataclass(slots=True)
class CheckIn:
    """One (user, location, time) visit record.

    ``lat``/``lon`` are carried through parsing and serialization but play
    no role in the entropy math.
    """

    user_id: str
    location_id: str
    timestamp: datetime
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("check-in user_id must be non-empty")
        if not self.location_id:
            raise ValueError("check-in location_id must be non-empty")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


class VisitTable(Mapping[str, Mapping[str, int]]):
    """Per-location visit counts: ``location_id -> {user_id -> count}``.

    Counts are positive integers. The table is immutable after
    construction, so it can be shared freely across threads.
    """

    __slots__ = ("_per_location",)

    def __init__(self, per_location: Mapping[str, Mapping[str, int]]):
        table: dict[str, dict[str, int]] = {}
        for location_id, counts in per_location.items():
            if not location_id:
                raise ValueError("location_id must be non-empty")
            inner: dict[str, int] = {}
            for user_id, count in counts.items():
                if not user_id:
                    raise ValueError(f"location {location_id!r}: user_id must be non-empty")
                if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                    raise ValueError(
                        f"location {location_id!r}, user {user_id!r}: "
                        f"count must be a positive integer, got {count!r}"
                    )
                inner[user_id] = count
            table[location_id] = inner
        self._per_location = table

    @classmethod
    def _unchecked(cls, per_location: dict[str, dict[str, int]]) -> "VisitTable":
        # Internal constructor for data this package built itself.
        table = cls({})
        table._per_location = per_location
        return table

    def __getitem__(self, location_id: str) -> Mapping[str, int]:
        return MappingProxyType(self._per_location[location_id])

    def __iter__(self) -> Iterator[str]:
        return iter(self._per_location)

    def __len__(self) -> int:
        return len(self._per_location)

    def __repr__(self) -> str:
        return f"VisitTable({len(self)} locations)"

    def total_visits(self, location_id: str) -> int:
        """Total number of visits to one location (c_l)."""
        return sum(self._per_location[location_id].values())

    def num_users(self, location_id: str) -> int:
        """Number of distinct visitors to one location (n)."""
        return len(self._per_location[location_id])


def count_visits(checkins: Iterable[CheckIn]) -> VisitTable:
    """Tally visits per (location, user) over a check-in stream.

    Locations nobody visited are simply absent. A record with a missing
    user or location id is rejected, naming the offending row index.
    """
    per_location: dict[str, dict[str, int]] = {}
    for row, checkin in enumerate(checkins):
        if not checkin.user_id or not checkin.location_id:
            raise ValueError(f"check-in row {row}: user_id and location_id must be non-empty")
        users = per_location.setdefault(checkin.location_id, {})
        users[checkin.user_id] = users.get(checkin.user_id, 0) + 1
    return VisitTable._unchecked(per_location)


def _two_point_entropy(a: float, b: float) -> float:
    # Entropy of the two-outcome split (a, b)/(a+b); a zero part contributes 0.
    total = a + b
    h = 0.0
    if a > 0:
        p = a / total
        h -= p * math.log(p)
    if b > 0:
        p = b / total
        h -= p * math.log(p)
    return h


def location_entropy(counts: Mapping[str, int]) -> float:
    """Shannon entropy (nats) of one location's visit distribution.

    Terms are accumulated in ascending user-id order so the result is
    byte-reproducible regardless of mapping insertion order.
    """
    if not counts:
        raise ValueError("location entropy is undefined for an empty visitor map")
    total = 0
    for count in counts.values():
        if count < 1:
            raise ValueError(f"visit counts must be >= 1, got {count}")
        total += count
    h = 0.0
    for user_id in sorted(counts):
        p = counts[user_id] / total
        h -= p * math.log(p)
    return max(h, 0.0)


def entropy_add_user(h: float, c_l: int, c_lu: int) -> float:
    """Entropy after a new user with ``c_lu`` visits joins a location.

    ``h`` is the current entropy and ``c_l`` the current total visit count;
    the update is exact:  H' = c_l/(c_l+c_lu) * H + H2(c_lu, c_l).
    """
    if c_l < 1 or c_lu < 1:
        raise ValueError("visit counts must be >= 1")
    if h < 0:
        raise ValueError("entropy must be non-negative")
    return (c_l / (c_l + c_lu)) * h + _two_point_entropy(c_lu, c_l)


def entropy_remove_user(h: float, c_l: int, c_lu: int) -> float:
    """Entropy after a user contributing ``c_lu`` of ``c_l`` visits leaves.

    Exact inverse of :func:`entropy_add_user`. At least one visitor must
    remain, so ``c_l > c_lu`` is required.
    """
    if c_lu < 1:
        raise ValueError("visit counts must be >= 1")
    if c_l <= c_lu:
        raise ValueError("removal would empty the location; c_l must exceed c_lu")
    return (c_l / (c_l - c_lu)) * (h - _two_point_entropy(c_lu, c_l - c_lu))


def max_entropy(n: int) -> float:
    """Largest possible entropy of a location with ``n`` visitors: ln(n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.log(n)
