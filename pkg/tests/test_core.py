"""Entropy math: frozen examples plus algebraic properties."""

import math
from datetime import datetime, timezone
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropy_sentry import (
    CheckIn,
    VisitTable,
    count_visits,
    entropy_add_user,
    entropy_remove_user,
    location_entropy,
    max_entropy,
)

LN2 = 0.6931471805599453

# High-precision reference values (mpmath, 50 digits, rounded to nearest double).
H_1_3 = 0.5623351446188084  # counts {1, 3}
H_1_1_2 = 1.0397207708399179  # counts {1, 1, 2}


def _ts(seconds: int) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def _ci(user: str, loc: str, t: int = 0) -> CheckIn:
    return CheckIn(user, loc, _ts(t))


count_tables = st.dictionaries(
    keys=st.integers(0, 49).map(lambda i: f"u{i:02d}"),
    values=st.integers(1, 100),
    min_size=1,
    max_size=50,
)


class TestCheckIn:
    def test_rejects_empty_ids(self):
        with pytest.raises(ValueError):
            CheckIn("", "l1", _ts(0))
        with pytest.raises(ValueError):
            CheckIn("u1", "", _ts(0))

    def test_rejects_out_of_range_coordinates(self):
        with pytest.raises(ValueError):
            CheckIn("u1", "l1", _ts(0), lat=91.0)
        with pytest.raises(ValueError):
            CheckIn("u1", "l1", _ts(0), lon=-180.5)

    def test_coordinates_optional(self):
        ci = CheckIn("u1", "l1", _ts(0))
        assert ci.lat is None and ci.lon is None


class TestVisitTable:
    def test_rejects_non_positive_counts(self):
        with pytest.raises(ValueError):
            VisitTable({"l1": {"u1": 0}})

    def test_rejects_non_integer_counts(self):
        with pytest.raises(ValueError):
            VisitTable({"l1": {"u1": 1.5}})
        with pytest.raises(ValueError):
            VisitTable({"l1": {"u1": True}})

    def test_mapping_interface(self):
        table = VisitTable({"l1": {"u1": 2, "u2": 1}, "l2": {"u1": 1}})
        assert len(table) == 2
        assert set(table) == {"l1", "l2"}
        assert table["l1"]["u1"] == 2
        assert table.total_visits("l1") == 3
        assert table.num_users("l1") == 2

    def test_inner_maps_are_read_only(self):
        table = VisitTable({"l1": {"u1": 2}})
        with pytest.raises(TypeError):
            table["l1"]["u1"] = 5


class TestCountVisits:
    def test_direct_tally(self):
        table = count_visits([_ci("u1", "l1"), _ci("u1", "l1"), _ci("u2", "l1")])
        assert dict(table["l1"]) == {"u1": 2, "u2": 1}

    def test_empty_input(self):
        assert len(count_visits([])) == 0

    def test_two_locations(self):
        table = count_visits([_ci("u1", "l1"), _ci("u1", "l2")])
        assert dict(table["l1"]) == {"u1": 1}
        assert dict(table["l2"]) == {"u1": 1}

    def test_malformed_record_reports_row_index(self):
        bad = SimpleNamespace(user_id="", location_id="l1")
        with pytest.raises(ValueError, match="row 1"):
            count_visits([_ci("u1", "l1"), bad])


class TestLocationEntropy:
    def test_uniform_two_users(self):
        assert location_entropy({"u1": 2, "u2": 2}) == pytest.approx(LN2, abs=1e-15)

    def test_single_user_is_zero(self):
        assert location_entropy({"u1": 5}) == 0.0

    def test_skewed_pair(self):
        assert location_entropy({"u1": 1, "u2": 3}) == pytest.approx(H_1_3, abs=1e-12)

    def test_empty_map_rejected(self):
        with pytest.raises(ValueError):
            location_entropy({})

    def test_non_positive_count_rejected(self):
        with pytest.raises(ValueError):
            location_entropy({"u1": 0})

    @given(count_tables)
    def test_bounded_by_log_n(self, counts):
        h = location_entropy(counts)
        assert 0.0 <= h <= max_entropy(len(counts)) + 1e-12

    @given(st.integers(1, 30), st.integers(1, 100))
    def test_equal_counts_attain_the_bound(self, n, c):
        counts = {f"u{i}": c for i in range(n)}
        assert location_entropy(counts) == pytest.approx(math.log(n), abs=1e-12)

    @given(count_tables, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, counts, rnd):
        ids = list(counts)
        shuffled = list(ids)
        rnd.shuffle(shuffled)
        relabeled = {new: counts[old] for new, old in zip(shuffled, ids)}
        assert location_entropy(relabeled) == pytest.approx(
            location_entropy(counts), abs=1e-12
        )


class TestIncrementalUpdates:
    def test_add_example(self):
        assert entropy_add_user(LN2, 2, 2) == pytest.approx(H_1_1_2, abs=1e-12)

    def test_add_two_equal_users(self):
        assert entropy_add_user(0.0, 1, 1) == pytest.approx(LN2, abs=1e-15)

    def test_remove_example(self):
        assert entropy_remove_user(H_1_1_2, 4, 2) == pytest.approx(LN2, abs=1e-12)

    def test_remove_to_single_user(self):
        assert entropy_remove_user(LN2, 2, 1) == pytest.approx(0.0, abs=1e-15)

    def test_remove_rejects_emptying(self):
        with pytest.raises(ValueError):
            entropy_remove_user(0.5, 3, 3)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            entropy_add_user(-0.1, 1, 1)
        with pytest.raises(ValueError):
            entropy_add_user(0.0, 0, 1)

    @given(count_tables, st.integers(1, 100))
    @settings(max_examples=200)
    def test_add_matches_recomputation(self, counts, new_count):
        h = location_entropy(counts)
        total = sum(counts.values())
        expected = location_entropy({**counts, "newcomer": new_count})
        assert entropy_add_user(h, total, new_count) == pytest.approx(expected, abs=1e-10)

    @given(count_tables.filter(lambda t: len(t) >= 2), st.data())
    @settings(max_examples=200)
    def test_remove_matches_recomputation(self, counts, data):
        user = data.draw(st.sampled_from(sorted(counts)))
        h = location_entropy(counts)
        total = sum(counts.values())
        remaining = {u: c for u, c in counts.items() if u != user}
        expected = location_entropy(remaining)
        assert entropy_remove_user(h, total, counts[user]) == pytest.approx(
            expected, abs=1e-10
        )

    @given(st.floats(0.0, 10.0), st.integers(1, 1000), st.integers(1, 1000))
    def test_remove_inverts_add(self, h, c_l, c_lu):
        grown = entropy_add_user(h, c_l, c_lu)
        assert entropy_remove_user(grown, c_l + c_lu, c_lu) == pytest.approx(h, abs=1e-12)


class TestMaxEntropy:
    @pytest.mark.parametrize(
        "n,expected", [(1, 0.0), (2, LN2), (10, 2.302585092994046)]
    )
    def test_values(self, n, expected):
        assert max_entropy(n) == pytest.approx(expected, abs=1e-15)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            max_entropy(0)
