"""Sensitivity bounds against brute-force enumeration and naive scans."""

import itertools
import math

import numpy as np
import pytest

from entropy_sentry import (
    ConfigurationError,
    SensitivityParams,
    SensitivityTable,
    brute_force_local_sensitivity,
    crowd_blend_min_users,
    crowd_blend_sensitivity,
    global_sensitivity,
    local_sensitivity,
    min_entropy_bound,
    precompute_smooth_sensitivity,
)

LN2 = 0.6931471805599453

# Reference values (mpmath at 50 digits, rounded to nearest double).
GS_REFERENCE = {
    2: 0.6931471805599453,  # closed-form second term 0.0597... loses to ln 2
    10: 0.6931471805599453,
    100: 2.0779905601801905,
    1000: 3.9751105450660718,
}
LS_5_20 = 0.7871479064090924
LS_3_1 = 0.4054651081081644  # ln(3/2)


def _counts_entropy(counts):
    total = sum(counts)
    return math.log(total) - sum(c * math.log(c) for c in counts) / total


class TestGlobalSensitivity:
    def test_single_visit_cap_is_exactly_ln2(self):
        assert global_sensitivity(1) == LN2

    @pytest.mark.parametrize("C,expected", sorted(GS_REFERENCE.items()))
    def test_matches_high_precision_reference(self, C, expected):
        assert global_sensitivity(C) == pytest.approx(expected, abs=1e-12)

    def test_non_decreasing_in_cap(self):
        values = [global_sensitivity(C) for C in range(1, 2001)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_rejects_non_positive_cap(self):
        with pytest.raises(ValueError):
            global_sensitivity(0)


class TestMinEntropyBound:
    def test_rejects_unit_cap(self):
        with pytest.raises(ValueError):
            min_entropy_bound(4, 1)

    def test_single_user_clamps_to_zero(self):
        assert min_entropy_bound(1, 2) == 0.0

    def test_below_maximum(self):
        assert min_entropy_bound(100, 10) < math.log(100)

    def test_lower_bounds_exhaustive_minimum(self):
        # Every integer count vector with n=4 users, counts in [1, 3].
        exhaustive_min = min(
            _counts_entropy(counts)
            for counts in itertools.product(range(1, 4), repeat=4)
        )
        assert min_entropy_bound(4, 3) <= exhaustive_min + 1e-12


class TestLocalSensitivity:
    @pytest.mark.parametrize("C", [1, 2, 7, 100])
    def test_single_user_is_ln2(self, C):
        assert local_sensitivity(1, C) == LN2

    def test_unit_cap_uses_departure_side(self):
        # Departure ln(n/(n-1)) dominates arrival ln((n+1)/n).
        assert local_sensitivity(3, 1) == pytest.approx(LS_3_1, abs=1e-12)

    def test_reference_value(self):
        assert local_sensitivity(5, 20) == pytest.approx(LS_5_20, abs=1e-12)

    def test_matches_brute_force_at_5_20(self):
        assert brute_force_local_sensitivity(5, 20) == pytest.approx(
            local_sensitivity(5, 20), abs=1e-9
        )

    @pytest.mark.parametrize("C", [1, 2, 3, 5, 20, 100])
    def test_never_exceeds_global_bound(self, C):
        gs = global_sensitivity(C)
        for n in range(1, 2001):
            assert local_sensitivity(n, C) <= gs + 1e-12

    def test_decreasing_past_threshold(self):
        # Basis of the crowd-blending bound and of the precomputation's
        # outer stopping rule.
        threshold = crowd_blend_min_users(20)
        values = [local_sensitivity(n, 20) for n in range(threshold, 500)]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("C", [2, 5])
    def test_supremum_attained_at_one_user(self, C):
        # For small caps the global bound is ln 2, reached at n = 1.
        assert local_sensitivity(1, C) == global_sensitivity(C)

    @pytest.mark.parametrize("C", [20, 100])
    def test_supremum_matches_global_bound_at_real_maximizer(self, C):
        # The departure-side expression, evaluated at the real-valued
        # maximizer n* = C/(ln C - 1) + 1, must recover the global bound;
        # integer n misses it by ~1e-6.
        n_star = C / (math.log(C) - 1.0) + 1.0
        departure = (
            math.log((n_star - 1) / (n_star - 1 + C))
            + C / (n_star - 1 + C) * math.log(C)
        )
        assert departure == pytest.approx(global_sensitivity(C), abs=1e-9)


class TestBruteForceOracle:
    def test_single_user_any_cap(self):
        assert brute_force_local_sensitivity(1, 3) == pytest.approx(LN2, abs=1e-12)

    def test_unit_cap(self):
        assert brute_force_local_sensitivity(3, 1) == pytest.approx(LS_3_1, abs=1e-12)

    @pytest.mark.parametrize("n", range(1, 7))
    @pytest.mark.parametrize("C", range(1, 6))
    def test_never_exceeds_closed_form(self, n, C):
        assert brute_force_local_sensitivity(n, C) <= local_sensitivity(n, C) + 1e-9

    def test_oversized_instance_rejected(self):
        with pytest.raises(ValueError, match="too large"):
            brute_force_local_sensitivity(50, 50)


class TestCrowdBlend:
    def test_uses_local_sensitivity_at_k(self):
        assert crowd_blend_sensitivity(25, 20) == local_sensitivity(25, 20)

    def test_below_threshold_names_minimum(self):
        with pytest.raises(ConfigurationError, match="minimum 12"):
            crowd_blend_sensitivity(2, 20)

    def test_minimum_threshold_value(self):
        assert crowd_blend_min_users(20) == 12
        assert crowd_blend_min_users(5) == 11

    def test_small_cap_rejected(self):
        with pytest.raises(ConfigurationError, match="C > e"):
            crowd_blend_sensitivity(100, 2)

    def test_monotone_decreasing_in_k(self):
        k_min = crowd_blend_min_users(20)
        values = [crowd_blend_sensitivity(k, 20) for k in range(k_min, 300)]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def naive_smooth_scan(C: int, epsilon: float, delta: float, N: int) -> np.ndarray:
    """Full O(N^2) scan with no stopping rules, used as the oracle.

    The discount factors reuse math.exp so candidate terms are bit-equal
    to the optimized implementation's.
    """
    beta = epsilon / (2.0 * math.log(2.0 / delta))
    ls = np.array([local_sensitivity(n, C) for n in range(1, 2 * N + 1)])
    decay = np.array([math.exp(-k * beta) for k in range(N + 1)])
    ks = np.arange(N + 1)
    out = np.empty(N)
    for n in range(1, N + 1):
        up = ls[n - 1 + ks]
        down = np.full(N + 1, -np.inf)
        reachable = ks <= n - 1
        down[reachable] = ls[n - 1 - ks[reachable]]
        out[n - 1] = np.max(decay * np.maximum(up, down))
    return out


class TestSmoothSensitivityPrecompute:
    def test_requires_cap_of_two(self):
        with pytest.raises(ValueError):
            precompute_smooth_sensitivity(SensitivityParams(C=1, epsilon=5.0, N=10))

    def test_beta_derivation(self):
        params = SensitivityParams(C=5, epsilon=5.0, delta=1e-8, N=10)
        assert params.beta == pytest.approx(5.0 / (2.0 * math.log(2.0 / 1e-8)), abs=1e-15)

    @pytest.mark.parametrize("C", [2, 5, 20])
    def test_matches_naive_scan(self, C):
        N = 300
        table = precompute_smooth_sensitivity(
            SensitivityParams(C=C, epsilon=5.0, delta=1e-8, xi=1e-3, N=N)
        )
        naive = naive_smooth_scan(C, 5.0, 1e-8, N)
        limit = table.floor_from if table.floor_from is not None else N
        assert np.array_equal(table.values[:limit], naive[:limit])
        if table.floor_from is not None:
            assert np.all(table.values[limit:] == table.xi)

    def test_bounded_by_local_and_global(self):
        table = precompute_smooth_sensitivity(
            SensitivityParams(C=20, epsilon=5.0, delta=1e-8, N=400)
        )
        gs = global_sensitivity(20)
        for n in range(1, table.N + 1):
            assert table.ss(n) >= local_sensitivity(n, 20) - 1e-15
            assert table.ss(n) <= gs + 1e-15

    def test_floor_region(self):
        # C=3 enters its decreasing regime around n=32 and drops below
        # xi near n=300, so N=400 exercises the floor.
        table = precompute_smooth_sensitivity(
            SensitivityParams(C=3, epsilon=5.0, delta=1e-8, xi=1e-3, N=400)
        )
        assert table.floor_from is not None
        assert 250 < table.floor_from < 350
        assert np.all(table.values[table.floor_from :] == 1e-3)
        assert np.all(table.values[: table.floor_from] > 0)

    def test_lookup_range_checks(self):
        table = precompute_smooth_sensitivity(SensitivityParams(C=5, epsilon=5.0, N=50))
        assert table.ss(1) == pytest.approx(LN2, abs=1e-12)
        with pytest.raises(ConfigurationError, match="N >= 51"):
            table.ss(51)
        with pytest.raises(ValueError):
            table.ss(0)


class TestSensitivityParamsValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"C": 0, "epsilon": 1.0},
            {"C": 5, "epsilon": 0.0},
            {"C": 5, "epsilon": 1.0, "delta": 0.0},
            {"C": 5, "epsilon": 1.0, "delta": 1.5},
            {"C": 5, "epsilon": 1.0, "xi": 0.0},
            {"C": 5, "epsilon": 1.0, "N": 0},
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            SensitivityParams(**kwargs)
