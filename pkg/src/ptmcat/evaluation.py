"""Stratified k-fold cross-validation with precision/recall/F1 reporting."""

from __future__ import annotations

import json
import logging
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from . import classifiers, features
from .errors import LengthMismatch, TooFewSamples
from .registry import PtmRecord

logger = logging.getLogger(__name__)

AVERAGINGS = ("weighted", "macro", "micro")


@dataclass(frozen=True)
class PipelineConfig:
    classifier: str = "SVC"
    min_df: int = 2
    stem: bool = False
    ngram_max: int = 1
    smoothing: float = 1.0
    normalize_weights: bool = False
    C: float = 1.0
    epochs: int = 50
    solver: str = "smo"
    seed: int = 0

    def classifier_params(self) -> dict:
        return {
            "smoothing": self.smoothing,
            "normalize_weights": self.normalize_weights,
            "C": self.C,
            "epochs": self.epochs,
            "seed": self.seed,
            "solver": self.solver,
        }

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier.upper(),
            "min_df": self.min_df,
            "stem": self.stem,
            "ngram_max": self.ngram_max,
            "smoothing": self.smoothing,
            "normalize_weights": self.normalize_weights,
            "C": self.C,
            "epochs": self.epochs,
            "solver": self.solver,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    per_class: dict[str, ClassScores]
    weighted: tuple[float, float, float]
    macro: tuple[float, float, float]
    micro: tuple[float, float, float]

    def averaged(self, scheme: str = "weighted") -> tuple[float, float, float]:
        return getattr(self, scheme)


@dataclass(frozen=True)
class FoldMetrics:
    fold_index: int
    precision: float
    recall: float
    f1: float
    per_class: dict[str, ClassScores]
    weighted: tuple[float, float, float]
    macro: tuple[float, float, float]
    micro: tuple[float, float, float]
    test_indices: tuple[int, ...] = ()
    y_true: tuple[str, ...] = ()
    y_pred: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {
            "fold_index": self.fold_index,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "weighted": list(self.weighted),
            "macro": list(self.macro),
            "micro": list(self.micro),
            "per_class": {
                tag: {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for tag, s in self.per_class.items()
            },
        }
        if self.y_pred:
            out["predictions"] = {
                "test_indices": list(self.test_indices),
                "y_true": list(self.y_true),
                "y_pred": list(self.y_pred),
            }
        return out


@dataclass(frozen=True)
class CvReport:
    kind: str
    folds: tuple[FoldMetrics, ...]
    averages: tuple[float, float, float]
    seed: int
    k: int
    averaging: str = "weighted"
    config: dict = field(default_factory=dict)
    dropped_classes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        n = len(self.folds)
        return {
            "kind": self.kind,
            "k": self.k,
            "seed": self.seed,
            "averaging": self.averaging,
            "averages": dict(zip(("precision", "recall", "f1"), self.averages)),
            "averages_by_scheme": {
                scheme: [
                    math.fsum(getattr(f, scheme)[m] for f in self.folds) / n for m in range(3)
                ]
                for scheme in AVERAGINGS
            },
            "dropped_classes": list(self.dropped_classes),
            "config": dict(self.config),
            "folds": [f.to_dict() for f in self.folds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_metrics(y_true: Sequence[str], y_pred: Sequence[str]) -> Metrics:
    """Per-class and averaged precision, recall and F1.

    Zero denominators yield 0. Weighted averages use the true-class support
    as weights; the class set is the union of true and predicted labels.
    """
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    if not y_true:
        raise LengthMismatch("need at least one prediction")
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    for t, p in zip(y_true, y_pred):
        if t == p:
            tp[t] += 1
        else:
            fp[p] += 1
            fn[t] += 1
    support = Counter(y_true)
    per_class = {}
    for c in sorted(set(y_true) | set(y_pred)):
        p = _safe_div(tp[c], tp[c] + fp[c])
        r = _safe_div(tp[c], tp[c] + fn[c])
        per_class[c] = ClassScores(p, r, _safe_div(2 * p * r, p + r), support[c])

    n = len(y_true)
    weighted = tuple(
        math.fsum(getattr(s, m) * s.support for s in per_class.values()) / n
        for m in ("precision", "recall", "f1")
    )
    macro = tuple(
        math.fsum(getattr(s, m) for s in per_class.values()) / len(per_class)
        for m in ("precision", "recall", "f1")
    )
    # single-label: micro P = micro R = micro F1 = accuracy
    acc = sum(tp.values()) / n
    return Metrics(per_class=per_class, weighted=weighted, macro=macro, micro=(acc, acc, acc))


def make_folds(labels: Sequence[Hashable], k: int, seed: int) -> list[list[int]]:
    """Split sample indices into ``k`` stratified folds.

    Classes with fewer than ``k`` members are left out (with a warning).
    Each class is shuffled with ``seed`` and dealt round-robin, continuing
    the deal across classes, so fold sizes and per-class counts both differ
    by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    by_class: dict = defaultdict(list)
    for i, y in enumerate(labels):
        by_class[y].append(i)
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    slot = 0
    for y in sorted(by_class, key=str):
        members = by_class[y]
        if len(members) < k:
            logger.warning("dropping class %r: %d samples < k=%d", y, len(members), k)
            continue
        rng.shuffle(members)
        for i in members:
            folds[slot % k].append(i)
            slot += 1
    if slot == 0:
        raise TooFewSamples(f"no class has at least k={k} samples")
    return [sorted(f) for f in folds]


def _vectorize(tokens_train, tokens_test, config: PipelineConfig):
    if config.ngram_max > 1:
        tokens_train = [features.add_ngrams(t, config.ngram_max) for t in tokens_train]
        tokens_test = [features.add_ngrams(t, config.ngram_max) for t in tokens_test]
    space = features.fit(tokens_train, min_df=config.min_df)
    return (
        space,
        features.transform_all(space, tokens_train),
        features.transform_all(space, tokens_test),
    )


def evaluate_cv(
    records: Sequence[PtmRecord],
    config: PipelineConfig | None = None,
    k: int = 10,
    seed: int = 0,
    averaging: str = "weighted",
    keep_predictions: bool = False,
) -> CvReport:
    """Cross-validate a classifier that predicts pipeline tags from cards.

    Every fold fits its own feature space on the training split only.
    """
    config = config or PipelineConfig()
    if averaging not in AVERAGINGS:
        raise ValueError(f"averaging must be one of {AVERAGINGS}")
    labels = [r.pipeline_tag for r in records]
    folds = make_folds(labels, k, seed)
    retained = sorted(i for f in folds for i in f)
    kept_classes = {labels[i] for i in retained}
    if len(kept_classes) < 2:
        raise TooFewSamples(f"need >= 2 classes with >= {k} samples, got {len(kept_classes)}")
    dropped = tuple(sorted(set(labels) - kept_classes))
    tokens = {i: features.preprocess(records[i].card_data, stem=config.stem) for i in retained}

    results = []
    for fold_no, test in enumerate(folds, start=1):
        test_set = set(test)
        train = [i for i in retained if i not in test_set]
        space, x_train, x_test = _vectorize(
            [tokens[i] for i in train], [tokens[i] for i in test], config
        )
        model = classifiers.train(
            config.classifier,
            x_train,
            [labels[i] for i in train],
            n_features=len(space),
            **config.classifier_params(),
        )
        y_true = [labels[i] for i in test]
        y_pred = classifiers.predict_batch(model, x_test)
        m = compute_metrics(y_true, y_pred)
        p, r, f1 = m.averaged(averaging)
        results.append(
            FoldMetrics(
                fold_index=fold_no,
                precision=p,
                recall=r,
                f1=f1,
                per_class=m.per_class,
                weighted=m.weighted,
                macro=m.macro,
                micro=m.micro,
                test_indices=tuple(test) if keep_predictions else (),
                y_true=tuple(y_true) if keep_predictions else (),
                y_pred=tuple(y_pred) if keep_predictions else (),
            )
        )
        logger.info("fold %d/%d: P=%.3f R=%.3f F1=%.3f", fold_no, k, p, r, f1)

    averages = tuple(math.fsum(getattr(f, m) for f in results) / k for m in ("precision", "recall", "f1"))
    return CvReport(
        kind=config.classifier.upper(),
        folds=tuple(results),
        averages=averages,
        seed=seed,
        k=k,
        averaging=averaging,
        config=config.to_dict(),
        dropped_classes=dropped,
    )


def render_cv_table(reports: Sequence[CvReport], digits: int = 3) -> str:
    """Fold-by-fold table: one column per (metric, classifier) pair plus an Average row."""
    if not reports:
        return ""
    k = reports[0].k
    metrics = (("Precision", "precision"), ("Recall", "recall"), ("F1 Score", "f1"))
    kinds = [r.kind for r in reports]
    cell = digits + 2
    col = max(cell, *(len(x) for x in kinds))
    group = len(kinds) * col + (len(kinds) - 1) * 3
    header1 = f"{'':<7} | " + " | ".join(f"{title:^{group}}" for title, _ in metrics)
    header2 = f"{'Fold':<7} | " + " | ".join(
        " | ".join(f"{kind:>{col}}" for kind in kinds) for _ in metrics
    )
    lines = [header1, header2, "-" * len(header2)]

    def row(label, values):
        return f"{label:<7} | " + " | ".join(f"{v:>{col}.{digits}f}" for v in values)

    for i in range(k):
        lines.append(row(str(i + 1), [getattr(r.folds[i], attr) for _, attr in metrics for r in reports]))
    lines.append("-" * len(header2))
    lines.append(row("Average", [r.averages[m] for m in range(3) for r in reports]))
    return "\n".join(lines) + "\n"
