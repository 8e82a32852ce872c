"""Name-similarity mapping from a PTM to registry pipeline tags.

For a given PTM name and SE task, every registry model whose bare name is
similar enough to the PTM contributes a ``(pipeline_tag, task)`` pair.
Similarity is the weighted Levenshtein ratio

    sim(a, b) = (|a| + |b| - d_w(a, b)) / (|a| + |b|)

where ``d_w`` charges 1 per insertion/deletion and 2 per substitution.
With the default threshold 0.8 this accepts, for "roberta", names such as
"sloberta" (exactly 0.8) and "roberta-go" (14/17).
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyName
from .registry import PtmRecord
from .taxonomy import EvidenceDoc, tasks_for_ptm

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.8


def levenshtein(a: str, b: str, sub_cost: int = 1) -> int:
    """Edit distance with unit insert/delete cost and ``sub_cost`` per substitution."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(
                min(
                    prev[j] + 1,
                    cur[j - 1] + 1,
                    prev[j - 1] + (0 if ca == cb else sub_cost),
                )
            )
        prev = cur
    return prev[-1]


def normalize_name(name: str) -> str:
    """Lowercase and keep only the segment after the last ``/``."""
    return name.strip().rsplit("/", 1)[-1].strip().lower()


def name_similarity(a: str, b: str) -> float:
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return (total - levenshtein(a, b, sub_cost=2)) / total


@dataclass(frozen=True)
class MatchResult:
    model_id: str
    matched_name: str
    pipeline_tag: str | None
    score: float

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "matched_name": self.matched_name,
            "pipeline_tag": self.pipeline_tag,
            "score": self.score,
        }


@dataclass(frozen=True, order=True)
class MappingEntry:
    pipeline_tag: str
    task: str

    def __post_init__(self):
        if not self.pipeline_tag:
            raise ValueError("pipeline_tag must be non-empty")

    def to_dict(self) -> dict:
        return {"pipeline_tag": self.pipeline_tag, "task": self.task}


@dataclass(frozen=True)
class ExplainRow:
    ptm: str
    pipeline_tag: str | None
    macro_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"ptm": self.ptm, "pipeline_tag": self.pipeline_tag, "macro_ids": list(self.macro_ids)}

    def to_text(self) -> str:
        return f"{self.ptm} | {self.pipeline_tag or '-'} | {', '.join(self.macro_ids) or '-'}"


def _check_threshold(threshold: float) -> None:
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")


def find_similar(
    ptm_name: str,
    records: Iterable[PtmRecord],
    threshold: float = DEFAULT_THRESHOLD,
    strict: bool = False,
) -> list[MatchResult]:
    """Registry models whose normalised name is similar to ``ptm_name``.

    A record matches when its score is ``>= threshold`` (``> threshold``
    with ``strict``). Results are sorted by score descending, then model id.
    """
    _check_threshold(threshold)
    target = normalize_name(ptm_name or "")
    if not target:
        raise EmptyName("PTM name must be non-empty")
    n = len(target)
    cache: dict[str, float] = {}
    out = []
    for r in records:
        name = normalize_name(r.model_id)
        m = len(name)
        # sim <= 2*min(n, m)/(n + m); skip the DP when that bound already fails
        bound = 2 * min(n, m) / (n + m) if n + m else 1.0
        if bound < threshold or (strict and bound <= threshold):
            continue
        score = cache.get(name)
        if score is None:
            score = cache[name] = name_similarity(target, name)
        if score > threshold or (score == threshold and not strict):
            out.append(MatchResult(r.model_id, name, r.pipeline_tag, score))
    out.sort(key=lambda mr: (-mr.score, mr.model_id))
    return out


def map_task(
    ptm_name: str,
    task: str,
    records: Iterable[PtmRecord],
    threshold: float = DEFAULT_THRESHOLD,
    strict: bool = False,
) -> set[MappingEntry]:
    """Pair the pipeline tag of every similar model with ``task``.

    Similar models without a tag are skipped (and counted in the log).
    """
    if not task or not task.strip():
        raise ValueError("task must be non-empty")
    matches = find_similar(ptm_name, records, threshold, strict)
    untagged = sum(1 for m in matches if not m.pipeline_tag)
    if untagged:
        logger.info("%d similar models for %r have no pipeline tag", untagged, ptm_name)
    return {MappingEntry(m.pipeline_tag, task) for m in matches if m.pipeline_tag}


def dominant_tag(matches: Sequence[MatchResult]) -> str | None:
    counts = Counter(m.pipeline_tag for m in matches if m.pipeline_tag)
    if not counts:
        return None
    return min(counts, key=lambda tag: (-counts[tag], tag))


def explain_mapping(
    ptm_name: str,
    records: Iterable[PtmRecord],
    evidence: Iterable[EvidenceDoc],
    threshold: float = DEFAULT_THRESHOLD,
    strict: bool = False,
) -> ExplainRow:
    """Most frequent tag among similar models plus the macro tasks in whose
    literature the PTM is named."""
    tag = dominant_tag(find_similar(ptm_name, records, threshold, strict))
    macros = tasks_for_ptm(ptm_name, evidence)
    return ExplainRow(ptm_name.strip(), tag, tuple(sorted(macros, key=_macro_key)))


def _macro_key(macro_id: str):
    digits = macro_id[1:]
    return (int(digits) if digits.isdigit() else 0, macro_id)
