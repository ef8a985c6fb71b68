import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benchmark.metrics import (
    asserted_value,
    compute_rp_at_k,
    compute_srr,
    compute_tcs,
    macro_average,
    recount_rp_at_k,
    recount_srr,
    recount_tcs,
)


def test_storage_reduction_rate() -> None:
    assert compute_srr(550, 1000) == pytest.approx(0.45)
    assert compute_srr(0, 10) == 1.0
    assert compute_srr(10, 10) == 0.0


@pytest.mark.parametrize(("retained", "total"), [(1, 0), (-1, 5), (6, 5)])
def test_storage_reduction_rate_rejects_impossible_counts(retained: int, total: int) -> None:
    with pytest.raises(ValueError):
        compute_srr(retained, total)


def test_relevance_precision() -> None:
    retrieved = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]

    assert compute_rp_at_k(retrieved, {"a", "c", "j"}, 10) == pytest.approx(0.3)
    assert compute_rp_at_k(["a", "b"], {"a", "b"}, 10) == 1.0
    assert compute_rp_at_k([], {"a"}, 5) == 0.0
    assert compute_rp_at_k(retrieved, {"j"}, 3) == 0.0
    with pytest.raises(ValueError):
        compute_rp_at_k(retrieved, {"a"}, 0)


@pytest.mark.parametrize(("created_times", "expected"), [
    ([1.0, 2.0, 3.0], 1.0),
    ([3.0, 2.0, 1.0], 0.0),
    ([1.0, 2.0, 4.0, 3.0], 5 / 6),
    ([2.0, 2.0], 0.5),
    ([7.0], 1.0),
    ([], 1.0),
])
def test_temporal_consistency(created_times: list[float], expected: float) -> None:
    assert compute_tcs(created_times) == pytest.approx(expected)


def test_asserted_value() -> None:
    assert asserted_value("fav_color|alice|blue", "fav_color|alice") == "blue"
    assert asserted_value("fav_color|alice|blue. fav_color|alice|red dark", "fav_color|alice") == "red"
    assert asserted_value("alice likes tea", "fav_color|alice") is None
    assert asserted_value("fav_color|alice|", "fav_color|alice") is None


def test_macro_average_skips_undefined_values() -> None:
    assert macro_average([1.0, None, 0.5]) == 0.75
    assert macro_average([None, None]) is None


times = st.lists(st.integers(min_value=0, max_value=20).map(float), max_size=12)
ids = st.lists(st.sampled_from("abcdefghij"), max_size=10, unique=True)


@settings(max_examples=300, deadline=None)
@given(created_times=times)
def test_temporal_consistency_matches_the_recount(created_times: list[float]) -> None:
    assert compute_tcs(created_times) == pytest.approx(recount_tcs(created_times))


@settings(max_examples=300, deadline=None)
@given(retrieved=ids, relevant=st.sets(st.sampled_from("abcdefghij")), k=st.integers(min_value=1, max_value=12))
def test_relevance_precision_matches_the_recount(retrieved: list[str], relevant: set[str], k: int) -> None:
    assert compute_rp_at_k(retrieved, relevant, k) == pytest.approx(recount_rp_at_k(retrieved, relevant, k))


def test_storage_reduction_recount() -> None:
    kinds = ["observe", "query", "observe", "tick", "observe", "observe"]

    assert recount_srr(kinds, 1) == pytest.approx(compute_srr(1, 4))
    assert recount_srr([], 0) == 0.0
