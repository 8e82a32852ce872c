"""Two-stage filtering that turns a raw registry into the classification set.

Stage one drops models without a card or a pipeline tag. Stage two drops
models whose tag is rare (support at most ``alpha``, the median per-tag
support) and which are rarely downloaded (downloads at most ``beta``, the
mean download count). Support is measured after stage one.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

from .errors import EmptyDataset
from .registry import PtmRecord

COMBINE_MODES = ("AND", "OR")


@dataclass(frozen=True)
class FilterThresholds:
    alpha: float
    beta: float
    combine: str = "AND"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        combine = self.combine.upper()
        if combine not in COMBINE_MODES:
            raise ValueError(f"combine must be one of {COMBINE_MODES}, got {self.combine!r}")
        object.__setattr__(self, "combine", combine)


@dataclass(frozen=True)
class FilterReport:
    initial_ptms: int
    initial_tags: int
    dropped_missing: int
    dropped_threshold: int
    tags_removed: int
    final_ptms: int
    final_tags: int
    thresholds: FilterThresholds

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        """Render the report as the four-row filtering table."""
        rows = [
            ("PTMs in the initial dump", f"{self.initial_ptms:,}", f"{self.initial_tags:,}"),
            ("PTMs with missing data", f"{self.dropped_missing:,}", "-"),
            (
                f"PTMs with support<=alpha {self.thresholds.combine.lower()} downloads<=beta",
                f"{self.dropped_threshold:,}",
                f"{self.tags_removed:,}",
            ),
            ("D_f", f"{self.final_ptms:,}", f"{self.final_tags:,}"),
        ]
        head = ("", "#PTMs", "#pipeline tags")
        w0 = max(len(r[0]) for r in rows + [head])
        w1 = max(len(r[1]) for r in rows + [head])
        w2 = max(len(r[2]) for r in rows + [head])
        lines = [f"{head[0]:<{w0}} | {head[1]:>{w1}} | {head[2]:>{w2}}"]
        lines.append("-" * len(lines[0]))
        for label, ptms, tags in rows:
            lines.append(f"{label:<{w0}} | {ptms:>{w1}} | {tags:>{w2}}")
        lines.append(
            f"alpha (median support) = {self.thresholds.alpha:g}; "
            f"beta (mean downloads) = {self.thresholds.beta:g}"
        )
        return "\n".join(lines) + "\n"


def drop_missing(records: Iterable[PtmRecord]) -> tuple[list[PtmRecord], int]:
    kept = []
    dropped = 0
    for r in records:
        if r.card_data is None or r.pipeline_tag is None:
            dropped += 1
        else:
            kept.append(r)
    return kept, dropped


def tag_support(records: Iterable[PtmRecord]) -> Counter:
    return Counter(r.pipeline_tag for r in records if r.pipeline_tag is not None)


def compute_thresholds(records: Sequence[PtmRecord], combine: str = "AND") -> FilterThresholds:
    """Median per-tag support and mean downloads of ``records``.

    An even number of tags takes the midpoint of the two middle supports.
    """
    if not records:
        raise EmptyDataset("cannot compute thresholds on an empty dataset")
    if any(r.pipeline_tag is None for r in records):
        raise EmptyDataset("every record must carry a pipeline tag; run drop_missing first")
    support = tag_support(records)
    alpha = statistics.median(support.values())
    beta = statistics.fmean(r.downloads for r in records)
    return FilterThresholds(alpha=float(alpha), beta=float(beta), combine=combine)


def is_below_thresholds(support: int, downloads: int, thresholds: FilterThresholds) -> bool:
    rare = support <= thresholds.alpha
    unpopular = downloads <= thresholds.beta
    if thresholds.combine == "AND":
        return rare and unpopular
    return rare or unpopular


def apply_thresholds(
    records: Sequence[PtmRecord],
    thresholds: FilterThresholds,
    *,
    initial_ptms: int | None = None,
    initial_tags: int | None = None,
    dropped_missing: int = 0,
) -> tuple[list[PtmRecord], FilterReport]:
    """Drop records that fall under the thresholds.

    The keyword arguments let a caller that already ran :func:`drop_missing`
    carry the raw-dump counts into the report; by default the report treats
    ``records`` as the initial dump.
    """
    support = tag_support(records)
    kept = [
        r
        for r in records
        if not is_below_thresholds(support[r.pipeline_tag], r.downloads, thresholds)
    ]
    if initial_ptms is None:
        initial_ptms = len(records) + dropped_missing
    if initial_tags is None:
        initial_tags = len(support)
    final_tags = len(tag_support(kept))
    report = FilterReport(
        initial_ptms=initial_ptms,
        initial_tags=initial_tags,
        dropped_missing=dropped_missing,
        dropped_threshold=len(records) - len(kept),
        tags_removed=initial_tags - final_tags,
        final_ptms=len(kept),
        final_tags=final_tags,
        thresholds=thresholds,
    )
    return kept, report


def filter_registry(
    records: Sequence[PtmRecord],
    combine: str = "AND",
    alpha: float | None = None,
    beta: float | None = None,
) -> tuple[list[PtmRecord], FilterReport]:
    """Run both stages on a raw registry.

    ``alpha``/``beta`` override the computed median/mean when given.
    """
    records = list(records)
    initial_tags = len(tag_support(records))
    complete, dropped = drop_missing(records)
    if alpha is None or beta is None:
        computed = compute_thresholds(complete, combine)
        thresholds = replace(
            computed,
            alpha=computed.alpha if alpha is None else float(alpha),
            beta=computed.beta if beta is None else float(beta),
        )
    else:
        thresholds = FilterThresholds(float(alpha), float(beta), combine)
    return apply_thresholds(
        complete,
        thresholds,
        initial_ptms=len(records),
        initial_tags=initial_tags,
        dropped_missing=dropped,
    )
