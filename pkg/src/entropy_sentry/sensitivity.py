"""Sensitivity calculus for location entropy under single-user change.

All bounds answer the same question: by how much can one user's arrival or
departure move a location's entropy? They are parameterized by the visit
cap C (largest number of visits one user contributes to a location) and,
for the per-location bounds, by the number of visitors n. Values are nats.

The module provides

* the dataset-wide worst case (:func:`global_sensitivity`),
* the per-(n, C) worst case (:func:`local_sensitivity`) together with the
  minimum-entropy bound it relies on (:func:`min_entropy_bound`),
* the crowd-blending variant that holds once every published location has
  at least k visitors (:func:`crowd_blend_sensitivity`),
* a smoothed upper envelope of the local bound precomputed for every
  n up to N (:func:`precompute_smooth_sensitivity`), and
* an exhaustive-enumeration oracle used to validate the closed forms
  (:func:`brute_force_local_sensitivity`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "SensitivityParams",
    "SensitivityTable",
    "global_sensitivity",
    "min_entropy_bound",
    "local_sensitivity",
    "crowd_blend_min_users",
    "crowd_blend_sensitivity",
    "precompute_smooth_sensitivity",
    "brute_force_local_sensitivity",
]

_LN2 = math.log(2.0)

# Enumeration budget for the brute-force oracle (number of count tables).
_BRUTE_FORCE_LIMIT = 10_000_000


def global_sensitivity(C: int) -> float:
    """Worst-case entropy change at any location, over all datasets.

    Equals max(ln 2, ln C - ln(ln C) - 1). The second expression only
    takes over once C exceeds e enough to make it larger than ln 2;
    at C = 1 it is undefined and the bound is exactly ln 2.
    """
    if C < 1:
        raise ValueError("C must be >= 1")
    if C == 1:
        return _LN2
    alt = math.log(C) - math.log(math.log(C)) - 1.0
    return alt if alt > _LN2 else _LN2


def min_entropy_bound(n: float, C: int) -> float:
    """Lower bound on the entropy of n visitors with counts in [1, C].

    The minimizing configuration mixes 1-count and C-count visitors; with
    the mix fraction relaxed to a real number the minimum has the closed
    form ln n - r + ln r + 1 where r = ln(C)/(C-1). Clamped below at 0,
    since entropy is non-negative. Requires C >= 2; with C = 1 all counts
    are equal and the entropy is exactly ln n.
    """
    if C < 2:
        raise ValueError("min_entropy_bound requires C >= 2; with C = 1 the entropy is ln n")
    if n < 1:
        raise ValueError("n must be >= 1")
    r = math.log(C) / (C - 1)
    return max(math.log(n) - r + math.log(r) + 1.0, 0.0)


def local_sensitivity(n: float, C: int) -> float:
    """Worst-case entropy change for a location with n visitors, cap C.

    Cases:

    * n = 1: a second visitor can raise the entropy by at most ln 2.
    * C = 1: all counts equal 1, so only the visitor count moves; the
      change is ln((n+1)/n) for an arrival and ln(n/(n-1)) for a
      departure, and the bound takes the larger (departure) side so it
      covers both directions of a one-user difference.
    * otherwise: the maximum of the two extremes where the changing user
      carries the full cap C (departure- and arrival-side), and of the
      stationary point where the change equals ln(1 + e^(-Hmin)) with
      Hmin the minimum entropy of the n-1 remaining visitors.
    """
    if n < 1 or C < 1:
        raise ValueError("n and C must be >= 1")
    if n == 1:
        return _LN2
    if C == 1:
        return max(math.log((n + 1) / n), math.log(n / (n - 1)))
    log_c = math.log(C)
    t_remove = math.log((n - 1) / (n - 1 + C)) + C / (n - 1 + C) * log_c
    t_add = math.log(n / (n + C)) + C / (n + C) * log_c
    t_stationary = math.log1p(math.exp(-min_entropy_bound(n - 1, C)))
    return max(t_remove, t_add, t_stationary)


def _decreasing_threshold(C: int) -> float:
    # n beyond which local_sensitivity(n, C) is guaranteed decreasing.
    # Only meaningful for C > e; below that the guarantee never applies.
    log_c = math.log(C)
    if log_c <= 1.0:
        return math.inf
    return C / (log_c - 1.0) + 1.0


def crowd_blend_min_users(C: int) -> int:
    """Smallest publication threshold k admissible for visit cap C."""
    if C < 1:
        raise ValueError("C must be >= 1")
    threshold = _decreasing_threshold(C)
    if not math.isfinite(threshold):
        raise ConfigurationError(
            f"crowd-blend calibration requires C > e, got C={C}: the per-location "
            "bound is only guaranteed to decrease beyond C/(ln C - 1) + 1"
        )
    return math.ceil(threshold)


def crowd_blend_sensitivity(k: int, C: int) -> float:
    """Worst-case entropy change over locations with at least k visitors.

    Valid because the local bound decreases in n past C/(ln C - 1) + 1,
    so the worst published location is the smallest one, n = k. Raises
    :class:`ConfigurationError` naming the minimal admissible k when the
    requested k sits below that regime.
    """
    k_min = crowd_blend_min_users(C)
    if k < k_min:
        raise ConfigurationError(
            f"k={k} is below the minimum {k_min} required for C={C}; raise k or lower C"
        )
    return local_sensitivity(k, C)


@dataclass(frozen=True)
class SensitivityParams:
    """Inputs of the smooth-sensitivity precomputation.

    ``beta`` is the smoothing rate derived from the privacy budget:
    beta = epsilon / (2 ln(2/delta)).
    """

    C: int
    epsilon: float
    delta: float = 1e-8
    xi: float = 1e-3
    N: int = 100_000

    def __post_init__(self) -> None:
        if self.C < 1:
            raise ValueError("C must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    @property
    def beta(self) -> float:
        return self.epsilon / (2.0 * math.log(2.0 / self.delta))


@dataclass
class SensitivityTable:
    """Precomputed smoothed sensitivity, indexed by visitor count n = 1..N.

    ``values[i]`` holds the bound for n = i + 1. Entries past
    ``floor_from`` (when set) are clamped to the tolerance ``xi``.
    """

    C: int
    beta: float
    xi: float
    values: np.ndarray
    floor_from: int | None = None

    @property
    def N(self) -> int:
        return len(self.values)

    def ss(self, n: int) -> float:
        """Smoothed sensitivity for a location with n visitors."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > self.N:
            raise ConfigurationError(
                f"n={n} exceeds the precomputed range N={self.N}; "
                f"recompute the sensitivity table with N >= {n}"
            )
        return float(self.values[n - 1])


def precompute_smooth_sensitivity(params: SensitivityParams) -> SensitivityTable:
    """Tabulate the smoothed sensitivity bound for every n in 1..N.

    For each n the bound is max over k >= 0 of e^(-k*beta) times the
    larger local sensitivity at distance k (n-k or n+k, the n-k side
    skipped once it falls below 1). Two sound early exits keep the scan
    fast: the inner loop stops once e^(-k*beta) * GS(C) cannot beat the
    running maximum (no later term can either), and the outer loop stops
    once the local bound has entered its decreasing regime and dropped
    below xi, after which remaining entries are published as the xi floor.
    With C <= e the decreasing-regime threshold is unavailable and the
    exits rely on the GS test and the xi comparison alone.
    """
    C = params.C
    if C < 2:
        raise ValueError("smooth-sensitivity precomputation requires C >= 2")
    beta = params.beta
    xi = params.xi
    N = params.N
    gs = global_sensitivity(C)
    threshold = _decreasing_threshold(C)
    past_threshold_known = math.isfinite(threshold)

    ls_cache: list[float] = [0.0]  # 1-indexed by n

    def ls_at(n: int) -> float:
        while len(ls_cache) <= n:
            ls_cache.append(local_sensitivity(len(ls_cache), C))
        return ls_cache[n]

    values = np.empty(N, dtype=np.float64)
    floor_from: int | None = None
    for n in range(1, N + 1):
        ss = ls_at(n)  # k = 0 term
        for k in range(1, N + 1):
            decay = math.exp(-k * beta)
            best_neighbor = ls_at(n + k)
            if n - k >= 1:
                down = ls_at(n - k)
                if down > best_neighbor:
                    best_neighbor = down
            candidate = decay * best_neighbor
            if candidate > ss:
                ss = candidate
            if decay * gs < ss and (not past_threshold_known or n + k > threshold):
                break
        values[n - 1] = ss
        if ls_at(n) < xi and (not past_threshold_known or n > threshold):
            floor_from = n
            values[n:] = xi
            break
    return SensitivityTable(C=C, beta=beta, xi=xi, values=values, floor_from=floor_from)


def _counts_entropy(counts: tuple[int, ...]) -> float:
    # Entropy via ln(S) - sum(c ln c)/S; exact for the small tables the
    # oracle enumerates.
    total = 0
    c_log_c = 0.0
    for c in counts:
        total += c
        c_log_c += c * math.log(c)
    return math.log(total) - c_log_c / total


def brute_force_local_sensitivity(n: int, C: int) -> float:
    """Exhaustive maximum entropy change for n visitors with counts in [1, C].

    Enumerates every multiset of n counts, then every single-user
    departure and every arrival with a count in [1, C], and returns the
    largest absolute entropy change observed. Departures are skipped at
    n = 1 since they would empty the location. Instances whose multiset
    count exceeds the enumeration budget are rejected.
    """
    if n < 1 or C < 1:
        raise ValueError("n and C must be >= 1")
    num_tables = math.comb(n + C - 1, n)
    if num_tables > _BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"instance too large: {num_tables} count tables exceed the "
            f"enumeration budget of {_BRUTE_FORCE_LIMIT}"
        )
    best = 0.0
    for counts in itertools.combinations_with_replacement(range(1, C + 1), n):
        h_before = _counts_entropy(counts)
        if n > 1:
            seen: set[int] = set()
            for i, c in enumerate(counts):
                if c in seen:
                    continue
                seen.add(c)
                h_after = _counts_entropy(counts[:i] + counts[i + 1 :])
                change = abs(h_after - h_before)
                if change > best:
                    best = change
        for extra in range(1, C + 1):
            h_after = _counts_entropy(counts + (extra,))
            change = abs(h_after - h_before)
            if change > best:
                best = change
    return best
