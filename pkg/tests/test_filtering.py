import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptmcat.errors import EmptyDataset
from ptmcat.filtering import (
    FilterThresholds,
    apply_thresholds,
    compute_thresholds,
    drop_missing,
    filter_registry,
)
from ptmcat.registry import PtmRecord

from _corpus import filter_fixture


def _naive_median(values):
    values = sorted(values)
    mid = len(values) // 2
    if len(values) % 2:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2


def _naive_filter(records, combine="AND"):
    """Independent predicate scan over the raw records."""
    complete = [r for r in records if r.card_data is not None and r.pipeline_tag is not None]
    support = {}
    for r in complete:
        support[r.pipeline_tag] = support.get(r.pipeline_tag, 0) + 1
    alpha = _naive_median(list(support.values()))
    beta = sum(r.downloads for r in complete) / len(complete)
    kept = []
    for r in complete:
        rare = support[r.pipeline_tag] <= alpha
        unpopular = r.downloads <= beta
        drop = (rare and unpopular) if combine == "AND" else (rare or unpopular)
        if not drop:
            kept.append(r)
    return kept, alpha, beta


def _check_report(report):
    assert report.final_ptms == report.initial_ptms - report.dropped_missing - report.dropped_threshold
    assert report.final_tags == report.initial_tags - report.tags_removed


def test_drop_missing_rule():
    kept, dropped = drop_missing([PtmRecord("a", None, "t"), PtmRecord("b", "c", "t")])
    assert [r.model_id for r in kept] == ["b"] and dropped == 1


def test_drop_missing_six_records():
    recs = [
        PtmRecord("a", "c", "t"),
        PtmRecord("b", None, "t"),
        PtmRecord("c", "c", "u"),
        PtmRecord("d", "c", None),
        PtmRecord("e", "c", "t"),
        PtmRecord("f", "c", "u"),
    ]
    kept, dropped = drop_missing(recs)
    oracle = [r for r in recs if r.card_data and r.pipeline_tag]
    assert kept == oracle and len(kept) == 4 and dropped == 2


def test_median_conventions():
    odd = [PtmRecord(f"m{i}", "c", t) for i, t in enumerate("abbbccccc")]
    assert compute_thresholds(odd).alpha == 3
    even = [PtmRecord(f"m{i}", "c", t) for i, t in enumerate("aabbbb")]
    assert compute_thresholds(even).alpha == 3.0


def test_mean_downloads():
    recs = [PtmRecord(f"m{i}", "c", "t", downloads=d) for i, d in enumerate([0, 10, 20])]
    assert compute_thresholds(recs).beta == 10.0


def test_compute_thresholds_errors():
    with pytest.raises(EmptyDataset):
        compute_thresholds([])
    with pytest.raises(EmptyDataset):
        compute_thresholds([PtmRecord("a", "c", None)])


def test_conjunction_keeps_popular_rare_tag():
    recs = [PtmRecord("r", "c", "rare", downloads=1000)] + [
        PtmRecord(f"m{i}", "c", "common", downloads=1) for i in range(5)
    ]
    kept, _ = apply_thresholds(recs, FilterThresholds(alpha=2, beta=10))
    assert "r" in {r.model_id for r in kept}


def test_fixture_hand_values():
    recs = filter_fixture()
    kept, report = filter_registry(recs)
    assert report.thresholds.alpha == 2.0
    assert report.thresholds.beta == 290.5
    assert report.initial_ptms == 20 and report.initial_tags == 5
    assert report.dropped_missing == 4 and report.dropped_threshold == 4
    assert report.final_ptms == 12 and report.final_tags == 3 and report.tags_removed == 2
    assert {r.model_id for r in kept} == {f"m{i:02d}" for i in range(1, 12)} | {"m13"}
    _check_report(report)


@pytest.mark.parametrize("combine", ["AND", "OR"])
def test_fixture_matches_naive_scan(combine):
    recs = filter_fixture()
    kept, report = filter_registry(recs, combine=combine)
    oracle, alpha, beta = _naive_filter(recs, combine)
    assert kept == oracle
    assert (report.thresholds.alpha, report.thresholds.beta) == (alpha, beta)
    _check_report(report)


def test_overrides():
    recs = filter_fixture()
    kept, report = filter_registry(recs, alpha=0, beta=0)
    assert report.dropped_threshold == 0 and len(kept) == 16
    _, report = filter_registry(recs, beta=10**9)
    assert report.thresholds.alpha == 2.0 and report.thresholds.beta == 10**9


def test_report_json_field_names():
    _, report = filter_registry(filter_fixture())
    data = json.loads(report.to_json())
    assert list(data) == [
        "initial_ptms", "initial_tags", "dropped_missing", "dropped_threshold",
        "tags_removed", "final_ptms", "final_tags", "thresholds",
    ]
    assert data["thresholds"] == {"alpha": 2.0, "beta": 290.5, "combine": "AND"}
    table = report.to_table()
    assert "PTMs with missing data" in table and "D_f" in table


def test_thresholds_validation():
    with pytest.raises(ValueError):
        FilterThresholds(-1, 0)
    with pytest.raises(ValueError):
        FilterThresholds(0, 0, "XOR")
    assert FilterThresholds(0, 0, "or").combine == "OR"


_records = st.lists(
    st.builds(
        lambda i, card, tag, dl: PtmRecord(f"m{i}", card, tag, 0, dl),
        st.integers(0, 10**6),
        st.sampled_from([None, "card"]),
        st.sampled_from([None, "a", "b", "c", "d", "e"]),
        st.integers(0, 1000),
    ),
    min_size=1,
    max_size=40,
    unique_by=lambda r: r.model_id,
)


@settings(max_examples=150, deadline=None)
@given(_records, st.sampled_from(["AND", "OR"]))
def test_filter_laws(records, combine):
    once, _ = drop_missing(records)
    twice, dropped_again = drop_missing(once)
    assert twice == once and dropped_again == 0
    if not once:
        return
    kept, report = filter_registry(records, combine=combine)
    _check_report(report)
    oracle, _, _ = _naive_filter(records, combine)
    assert kept == oracle
    surviving = {r.pipeline_tag for r in kept}
    assert report.final_tags == len(surviving)
    if combine == "AND":
        support = {}
        for r in once:
            support[r.pipeline_tag] = support.get(r.pipeline_tag, 0) + 1
        kept_ids = {r.model_id for r in kept}
        for r in once:
            if r.model_id not in kept_ids:
                assert support[r.pipeline_tag] <= report.thresholds.alpha
                assert r.downloads <= report.thresholds.beta
    if kept:
        again, _ = apply_thresholds(kept, compute_thresholds(kept, combine))
        assert set(again) <= set(kept)


def test_parallel_scan_equivalence():
    rng = random.Random(3)
    recs = [PtmRecord(f"m{i}", "c", rng.choice("abcdef"), 0, rng.randint(0, 500)) for i in range(300)]
    th = compute_thresholds(recs)
    whole, _ = apply_thresholds(recs, th)
    # support is global, so chunked evaluation must reuse the full-dataset support
    from ptmcat.filtering import is_below_thresholds, tag_support

    support = tag_support(recs)
    chunks = [recs[i : i + 37] for i in range(0, len(recs), 37)]
    merged = [r for c in chunks for r in c if not is_below_thresholds(support[r.pipeline_tag], r.downloads, th)]
    assert merged == whole
