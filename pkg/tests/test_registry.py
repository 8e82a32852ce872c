import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptmcat.errors import HeaderMismatch, MalformedRow
from ptmcat.registry import (
    IngestOptions,
    PtmRecord,
    ingest,
    ingest_csv,
    registry_stats,
    write_csv,
    write_jsonl,
)

HEADER = "model_id,card_data,pipeline_tag,likes,downloads\n"


def _write(tmp_path, body, name="reg.csv", header=HEADER):
    path = tmp_path / name
    path.write_text(header + body, encoding="utf-8")
    return path


def test_single_row_maps_fields(tmp_path):
    reg = ingest_csv(_write(tmp_path, 'm1,"hello card",fill-mask,3,100\n'))
    assert reg.ingested_count == 1
    r = reg.records[0]
    assert (r.model_id, r.card_data, r.pipeline_tag, r.likes, r.downloads) == (
        "m1", "hello card", "fill-mask", 3, 100,
    )


def test_empty_fields_become_absent(tmp_path):
    reg = ingest_csv(_write(tmp_path, "m2,,,0,0\n"))
    assert reg.records[0].card_data is None
    assert reg.records[0].pipeline_tag is None


def test_duplicate_ids_keep_first(tmp_path):
    reg = ingest_csv(_write(tmp_path, "m1,a,fill-mask,1,1\nm1,b,summarization,2,2\n"))
    assert reg.ingested_count == 1
    assert reg.rejected_count == 1
    assert reg.records[0].card_data == "a"


def test_header_is_case_insensitive_and_reorderable(tmp_path):
    header = "Downloads,LIKES,Pipeline_Tag,card_data,MODEL_ID,extra\n"
    reg = ingest_csv(_write(tmp_path, "7,2,fill-mask,txt,m1,zzz\n", header=header))
    r = reg.records[0]
    assert (r.model_id, r.likes, r.downloads, r.pipeline_tag) == ("m1", 2, 7, "fill-mask")


def test_header_mismatch_lists_missing(tmp_path):
    with pytest.raises(HeaderMismatch) as exc:
        ingest_csv(_write(tmp_path, "m1,x\n", header="model_id,card_data\n"))
    assert exc.value.missing == ["pipeline_tag", "likes", "downloads"]


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        ingest("/nonexistent/registry.csv")


def test_unparseable_counts_are_rejected(tmp_path):
    body = "m1,a,t,1,1\nm2,a,t,lots,1\nm3,a,t,1,-4\nm4,a,t,2.5,1\nm5,a,t,3.0,1\nm6,a,t\n"
    reg = ingest_csv(_write(tmp_path, body))
    assert [r.model_id for r in reg.records] == ["m1", "m5"]
    assert reg.rejected_count == 4
    assert reg.records[1].likes == 3


def test_null_counts_default_to_zero_unless_strict(tmp_path):
    path = _write(tmp_path, "m1,a,t,,NULL\n")
    r = ingest_csv(path).records[0]
    assert (r.likes, r.downloads) == (0, 0)
    with pytest.raises(MalformedRow):
        ingest_csv(path, IngestOptions(strict=True))


def test_strict_mode_raises_on_bad_row(tmp_path):
    path = _write(tmp_path, "m1,a,t,1,1\nm2,a,t,x,1\n")
    with pytest.raises(MalformedRow) as exc:
        ingest_csv(path, IngestOptions(strict=True))
    assert exc.value.line == 3


def test_custom_delimiter_and_embedded_newlines(tmp_path):
    header = HEADER.replace(",", ";")
    path = _write(tmp_path, 'm1;"line one\nline; two";fill-mask;1;2\n', header=header)
    reg = ingest_csv(path, IngestOptions(delimiter=";"))
    assert reg.records[0].card_data == "line one\nline; two"


def test_jsonl_input(tmp_path):
    path = tmp_path / "reg.jsonl"
    lines = [
        {"model_id": "a/m1", "card_data": "x", "pipeline_tag": "fill-mask", "likes": 1, "downloads": 2},
        {"model_id": "a/m2", "card_data": None, "pipeline_tag": None, "likes": 0, "downloads": 0},
        {"model_id": "a/m3"},
    ]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\nnot json\n", encoding="utf-8")
    reg = ingest(path)
    assert [r.model_id for r in reg.records] == ["a/m1", "a/m2"]
    assert reg.rejected_count == 2
    assert reg.records[0].name == "m1"


def test_row_accounting(tmp_path):
    body = "a,x,t,1,1\nb,x,t,1,1\na,y,t,1,1\nc,x,t,no,1\n,x,t,1,1\nd,,,,\n"
    reg = ingest_csv(_write(tmp_path, body))
    assert reg.ingested_count + reg.rejected_count == 6
    assert [r.model_id for r in reg.records] == ["a", "b", "d"]


def test_stats_empty():
    s = registry_stats([])
    assert (s.records, s.distinct_tags, s.missing_card, s.missing_tag) == (0, 0, 0, 0)


def test_stats_counting():
    recs = [
        PtmRecord("a", "c", "fill-mask"),
        PtmRecord("b", "c", "fill-mask"),
        PtmRecord("c", "c", None),
    ]
    s = registry_stats(recs)
    assert s.distinct_tags == 1 and s.missing_tag == 1 and s.missing_card == 0


def test_stats_match_row_scan():
    recs = [
        PtmRecord(f"m{i}", None if i % 3 == 0 else "card", [None, "a", "b", "a", "c"][i % 5], i, i)
        for i in range(10)
    ]
    s = registry_stats(recs)
    missing_card = missing_tag = 0
    tags = []
    for r in recs:
        if r.card_data is None:
            missing_card += 1
        if r.pipeline_tag is None:
            missing_tag += 1
        elif r.pipeline_tag not in tags:
            tags.append(r.pipeline_tag)
    assert (s.records, s.distinct_tags, s.missing_card, s.missing_tag) == (
        10, len(tags), missing_card, missing_tag,
    )
    assert s.missing_card <= s.records and s.missing_tag <= s.records


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    max_size=40,
)
_record = st.builds(
    PtmRecord,
    model_id=st.text(alphabet="abcdefgh/-_0123456789", min_size=1, max_size=12).filter(
        lambda s: s.strip()
    ),
    card_data=st.one_of(st.none(), _text),
    pipeline_tag=st.one_of(st.none(), st.sampled_from(["fill-mask", "text-classification", " t5 "])),
    likes=st.integers(0, 10**6),
    downloads=st.integers(0, 10**9),
)


def _unique(records):
    seen, out = set(), []
    for r in records:
        if r.model_id not in seen:
            seen.add(r.model_id)
            out.append(r)
    return out


@settings(max_examples=60, deadline=None)
@given(st.lists(_record, max_size=12))
def test_csv_round_trip(tmp_path_factory, records):
    records = _unique(records)
    path = tmp_path_factory.mktemp("rt") / "reg.csv"
    write_csv(records, path)
    back = ingest(path)
    assert list(back.records) == records
    assert back.rejected_count == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(_record, max_size=12))
def test_jsonl_round_trip(tmp_path_factory, records):
    records = _unique(records)
    path = tmp_path_factory.mktemp("rt") / "reg.jsonl"
    write_jsonl(records, path)
    assert list(ingest(path).records) == records


def test_ingestion_is_deterministic(tmp_path):
    path = _write(tmp_path, "".join(f"m{i},card {i},t{i % 3},{i},{i * 10}\n" for i in range(50)))
    assert ingest(path) == ingest(path)


def test_record_invariants():
    with pytest.raises(ValueError):
        PtmRecord("  ", "c", "t")
    with pytest.raises(ValueError):
        PtmRecord("m", "c", "t", likes=-1)
    assert PtmRecord(" m ", " ", "  ").card_data is None
