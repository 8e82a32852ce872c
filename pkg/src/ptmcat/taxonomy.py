"""SE-task taxonomy, literature evidence corpus and keyword screening.

Bundled data lives in ``ptmcat/data``:

* ``taxonomy.json``: JSON array of ``{macro_id, name, sub_tasks}``.
* ``evidence.jsonl``: one evidence document per line (see :class:`EvidenceDoc`).
* ``screening.json``: the literature query groups and the publication-year
  window that included documents must fall in.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError

MACRO_ID = re.compile(r"^M[1-9][0-9]*$")


@dataclass(frozen=True)
class TaxonomyEntry:
    macro_id: str
    name: str
    sub_tasks: tuple[str, ...]

    @property
    def label(self) -> str:
        return f"{self.macro_id}-{self.name}"

    def to_dict(self) -> dict:
        return {"macro_id": self.macro_id, "name": self.name, "sub_tasks": list(self.sub_tasks)}


@dataclass(frozen=True)
class EvidenceDoc:
    doc_id: str
    title: str
    abstract: str
    venue: str
    year: int
    ptm_names: tuple[str, ...] = ()
    macro_ids: tuple[str, ...] = ()
    included: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ptm_names"] = list(self.ptm_names)
        d["macro_ids"] = list(self.macro_ids)
        return d


def _compile_keyword(keyword: str) -> re.Pattern:
    kw = keyword.strip()
    prefix = kw.endswith("*")
    if prefix:
        kw = kw[:-1].rstrip()
    if not kw:
        raise ValueError(f"empty keyword {keyword!r}")
    body = r"\s+".join(re.escape(part) for part in kw.split())
    tail = "" if prefix else r"(?![^\W_])"
    return re.compile(r"(?<![^\W_])" + body + tail, re.IGNORECASE)


@dataclass(frozen=True)
class KeywordQuery:
    """Conjunction of keyword groups.

    A text matches when every group has at least one keyword hit. Keywords
    are case-insensitive phrases anchored at word starts; a trailing ``*``
    allows any continuation (``develop*`` hits "developers").
    """

    groups: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(g) for g in self.groups)
        if not groups or any(not g for g in groups):
            raise ValueError("a query needs at least one group and no empty groups")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(
            self, "_patterns", tuple(tuple(_compile_keyword(k) for k in g) for g in groups)
        )

    def matches(self, text: str) -> bool:
        return all(any(p.search(text) for p in group) for group in self._patterns)


def _read_json(path) -> object:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise SchemaError(str(path), "file is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON: {exc.msg}") from None


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise SchemaError(f"{where}.{key}", "missing field")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"{where}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def _string_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    values = _require(obj, key, list, where)
    for i, v in enumerate(values):
        if not isinstance(v, str) or not v.strip():
            raise SchemaError(f"{where}.{key}[{i}]", "expected non-empty string")
    return tuple(values)


def load_taxonomy(path=None) -> list[TaxonomyEntry]:
    path = path or bundled_path("taxonomy.json")
    data = _read_json(path)
    if not isinstance(data, list) or not data:
        raise SchemaError(str(path), "expected a non-empty JSON array")
    entries = []
    seen = set()
    for i, obj in enumerate(data):
        where = f"{path}[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError(where, "expected an object")
        macro_id = _require(obj, "macro_id", str, where)
        if not MACRO_ID.match(macro_id):
            raise SchemaError(f"{where}.macro_id", f"malformed macro id {macro_id!r}")
        if macro_id in seen:
            raise SchemaError(f"{where}.macro_id", f"duplicate macro id {macro_id!r}")
        seen.add(macro_id)
        name = _require(obj, "name", str, where)
        sub_tasks = _string_list(obj, "sub_tasks", where)
        if not sub_tasks:
            raise SchemaError(f"{where}.sub_tasks", "must be non-empty")
        entries.append(TaxonomyEntry(macro_id, name, sub_tasks))
    return entries


def load_evidence(
    path=None,
    taxonomy: Sequence[TaxonomyEntry] | None = None,
    years: tuple[int, int] | None = None,
) -> list[EvidenceDoc]:
    """Load and validate the JSON-lines evidence corpus.

    ``macro_ids`` must exist in ``taxonomy`` and included documents must be
    published within ``years`` (both default to the bundled data).
    """
    path = path or bundled_path("evidence.jsonl")
    taxonomy = taxonomy if taxonomy is not None else load_taxonomy()
    known = {t.macro_id for t in taxonomy}
    lo, hi = years if years is not None else load_screening()[1]
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    docs = []
    seen = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{line_no}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(where, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise SchemaError(where, "expected an object")
        doc_id = _require(obj, "doc_id", str, where)
        if doc_id in seen:
            raise SchemaError(f"{where}.doc_id", f"duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        year = _require(obj, "year", int, where)
        included = _require(obj, "included", bool, where)
        macro_ids = _string_list(obj, "macro_ids", where)
        for j, m in enumerate(macro_ids):
            if m not in known:
                raise SchemaError(f"{where}.macro_ids[{j}]", f"unknown macro id {m!r}")
        if included and not lo <= year <= hi:
            raise SchemaError(f"{where}.year", f"{year} outside the window {lo}-{hi}")
        docs.append(
            EvidenceDoc(
                doc_id=doc_id,
                title=_require(obj, "title", str, where),
                abstract=_require(obj, "abstract", str, where),
                venue=_require(obj, "venue", str, where),
                year=year,
                ptm_names=_string_list(obj, "ptm_names", where),
                macro_ids=macro_ids,
                included=included,
            )
        )
    if not docs:
        raise SchemaError(str(path), "file contains no documents")
    return docs


def load_screening(path=None) -> tuple[KeywordQuery, tuple[int, int]]:
    path = path or bundled_path("screening.json")
    data = _read_json(path)
    if not isinstance(data, dict):
        raise SchemaError(str(path), "expected an object")
    groups = _require(data, "query", list, str(path))
    for i, g in enumerate(groups):
        if not isinstance(g, list) or not g or not all(isinstance(k, str) and k for k in g):
            raise SchemaError(f"{path}.query[{i}]", "expected a non-empty list of keywords")
    years = _require(data, "years", list, str(path))
    if len(years) != 2 or not all(isinstance(y, int) for y in years) or years[0] > years[1]:
        raise SchemaError(f"{path}.years", "expected [first_year, last_year]")
    return KeywordQuery(tuple(tuple(g) for g in groups)), (years[0], years[1])


def save_taxonomy(entries: Iterable[TaxonomyEntry], path) -> None:
    Path(path).write_text(
        json.dumps([e.to_dict() for e in entries], indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def save_evidence(docs: Iterable[EvidenceDoc], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_dict(), ensure_ascii=False) + "\n")


def screen(docs: Iterable[EvidenceDoc], query: KeywordQuery) -> list[EvidenceDoc]:
    return [d for d in docs if query.matches(f"{d.title}\n{d.abstract}")]


@lru_cache(maxsize=256)
def _name_pattern(name: str) -> re.Pattern:
    return re.compile(r"(?<![^\W_])" + re.escape(name) + r"(?![^\W_])", re.IGNORECASE)


def mentions(text: str, name: str) -> bool:
    """Case-insensitive whole-word search, so "bert" does not hit "roberta"."""
    return _name_pattern(name.strip()).search(text) is not None


def tasks_for_ptm(name: str, docs: Iterable[EvidenceDoc]) -> set[str]:
    if not name or not name.strip():
        raise ValueError("PTM name must be non-empty")
    found: set[str] = set()
    for d in docs:
        if d.included and mentions(d.abstract, name):
            found.update(d.macro_ids)
    return found


def bundled_path(filename: str) -> Path:
    return Path(str(resources.files("ptmcat").joinpath("data", filename)))
