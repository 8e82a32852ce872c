"""Load a model-registry metadata export into validated records.

The export carries the five columns ``model_id, card_data, pipeline_tag,
likes, downloads``. CSV (RFC-4180 quoting) is canonical; JSON-lines with the
same keys is accepted too.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import HeaderMismatch, MalformedRow

logger = logging.getLogger(__name__)

COLUMNS = ("model_id", "card_data", "pipeline_tag", "likes", "downloads")
_NULL_TOKENS = {"", "null", "none", "nan", "\\n"}

# Model cards routinely exceed the csv module's 128 KiB field default.
csv.field_size_limit(min(sys.maxsize, 2**31 - 1))


@dataclass(frozen=True)
class PtmRecord:
    model_id: str
    card_data: str | None
    pipeline_tag: str | None
    likes: int = 0
    downloads: int = 0

    def __post_init__(self):
        model_id = (self.model_id or "").strip()
        if not model_id:
            raise ValueError("model_id must be non-empty")
        if self.likes < 0 or self.downloads < 0:
            raise ValueError(f"{model_id}: likes/downloads must be non-negative")
        object.__setattr__(self, "model_id", model_id)
        object.__setattr__(self, "card_data", _blank_to_none(self.card_data))
        tag = _blank_to_none(self.pipeline_tag)
        object.__setattr__(self, "pipeline_tag", tag.strip() if tag else None)

    @property
    def name(self) -> str:
        """Bare model name: the segment after the last ``/`` of the id."""
        return self.model_id.rsplit("/", 1)[-1]

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "card_data": self.card_data,
            "pipeline_tag": self.pipeline_tag,
            "likes": self.likes,
            "downloads": self.downloads,
        }


@dataclass(frozen=True)
class Registry:
    records: tuple[PtmRecord, ...]
    source_path: str = ""
    rejected_count: int = 0

    @property
    def ingested_count(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PtmRecord]:
        return iter(self.records)


@dataclass(frozen=True)
class IngestOptions:
    delimiter: str = ","
    strict: bool = False
    # "auto" picks JSON-lines for .jsonl/.ndjson suffixes, CSV otherwise.
    format: str = "auto"


@dataclass(frozen=True)
class RegistryStats:
    records: int = 0
    distinct_tags: int = 0
    missing_card: int = 0
    missing_tag: int = 0
    tag_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "distinct_tags": self.distinct_tags,
            "missing_card": self.missing_card,
            "missing_tag": self.missing_tag,
            "tag_counts": dict(self.tag_counts),
        }


def _blank_to_none(value):
    if value is None:
        return None
    if not isinstance(value, str):
        value = str(value)
    return value if value.strip() else None


def _parse_count(raw, strict: bool) -> int:
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in _NULL_TOKENS):
        if strict:
            raise ValueError("null count")
        return 0
    if isinstance(raw, bool):
        raise ValueError(f"not a count: {raw!r}")
    if isinstance(raw, int):
        value = raw
    else:
        text = str(raw).strip()
        try:
            value = int(text)
        except ValueError:
            # pandas-style exports write integer columns with NaNs as floats
            as_float = float(text)
            if not as_float.is_integer():
                raise ValueError(f"not an integer: {text!r}") from None
            value = int(as_float)
    if value < 0:
        raise ValueError(f"negative count: {value}")
    return value


def _build_record(row: dict, strict: bool) -> PtmRecord:
    card = row.get("card_data")
    tag = row.get("pipeline_tag")
    if isinstance(tag, str) and tag.strip().lower() in _NULL_TOKENS:
        tag = None
    return PtmRecord(
        model_id=str(row.get("model_id") or ""),
        card_data=card,
        pipeline_tag=tag,
        likes=_parse_count(row.get("likes"), strict),
        downloads=_parse_count(row.get("downloads"), strict),
    )


def _iter_csv_rows(path: Path, delimiter: str) -> Iterator[tuple[int, dict | None, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise HeaderMismatch(list(COLUMNS))
        lowered = [h.strip().lower() for h in header]
        missing = [c for c in COLUMNS if c not in lowered]
        if missing:
            raise HeaderMismatch(missing)
        positions = {c: lowered.index(c) for c in COLUMNS}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                yield line, None, f"expected {len(header)} fields, got {len(row)}"
                continue
            yield line, {c: row[i] for c, i in positions.items()}, ""


def _iter_jsonl_rows(path: Path) -> Iterator[tuple[int, dict | None, str]]:
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_no, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield line_no, None, "not a JSON object"
                continue
            missing = [c for c in COLUMNS if c not in obj]
            if missing:
                yield line_no, None, f"missing keys: {', '.join(missing)}"
                continue
            yield line_no, obj, ""


def _detect_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return "jsonl" if path.suffix.lower() in {".jsonl", ".ndjson"} else "csv"


def ingest(path, options: IngestOptions | None = None) -> Registry:
    """Parse a registry export into a :class:`Registry`.

    Rows with unparseable counts, an empty id or a duplicate id are rejected
    and counted (the first occurrence of an id wins). With ``options.strict``
    a malformed row raises :class:`MalformedRow` instead; duplicates are
    always skip-and-count.
    """
    options = options or IngestOptions()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    fmt = _detect_format(path, options.format)
    if fmt == "csv":
        rows = _iter_csv_rows(path, options.delimiter)
    elif fmt == "jsonl":
        rows = _iter_jsonl_rows(path)
    else:
        raise ValueError(f"unknown registry format {fmt!r}")

    records: list[PtmRecord] = []
    seen: set[str] = set()
    rejected = 0
    for line, row, problem in rows:
        if row is not None:
            try:
                record = _build_record(row, options.strict)
            except (ValueError, TypeError) as exc:
                problem = str(exc)
            else:
                if record.model_id in seen:
                    logger.debug("line %d: duplicate model_id %s", line, record.model_id)
                    rejected += 1
                    continue
                seen.add(record.model_id)
                records.append(record)
                continue
        if options.strict:
            raise MalformedRow(line, problem)
        logger.debug("line %d rejected: %s", line, problem)
        rejected += 1

    logger.info("ingested %d records from %s (%d rejected)", len(records), path, rejected)
    return Registry(records=tuple(records), source_path=str(path), rejected_count=rejected)


def ingest_csv(path, options: IngestOptions | None = None) -> Registry:
    options = options or IngestOptions()
    return ingest(path, IngestOptions(options.delimiter, options.strict, "csv"))


def ingest_jsonl(path, options: IngestOptions | None = None) -> Registry:
    options = options or IngestOptions()
    return ingest(path, IngestOptions(options.delimiter, options.strict, "jsonl"))


def write_csv(records: Iterable[PtmRecord], path, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow(
                [r.model_id, r.card_data or "", r.pipeline_tag or "", r.likes, r.downloads]
            )


def write_jsonl(records: Iterable[PtmRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def registry_stats(records: Iterable[PtmRecord]) -> RegistryStats:
    tag_counts: dict[str, int] = {}
    n = missing_card = missing_tag = 0
    for r in records:
        n += 1
        if r.card_data is None:
            missing_card += 1
        if r.pipeline_tag is None:
            missing_tag += 1
        else:
            tag_counts[r.pipeline_tag] = tag_counts.get(r.pipeline_tag, 0) + 1
    return RegistryStats(
        records=n,
        distinct_tags=len(tag_counts),
        missing_card=missing_card,
        missing_tag=missing_tag,
        tag_counts=dict(sorted(tag_counts.items())),
    )
