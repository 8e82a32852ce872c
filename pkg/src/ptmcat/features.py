"""Model-card preprocessing and TF-IDF document vectors.

Weights are sublinear term frequency times smoothed IDF,
``(1 + ln tf) * (ln((1 + N) / (1 + df)) + 1)``, then L2-normalised.
The vocabulary is learned from training documents only.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpus

_FRONT_MATTER = re.compile(r"\A\ufeff?\s*---[ \t]*\r?\n.*?\r?\n---[ \t]*(?:\r?\n|\Z)", re.S)
_CODE_FENCE = re.compile(r"^[ \t]*(```|~~~).*?^[ \t]*\1[^\n]*$", re.S | re.M)
_URL = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.I)
_TOKEN = re.compile(r"[^\W_]+")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("ptmcat").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


@lru_cache(maxsize=1)
def _stemmer():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ImportError("stemming needs nltk: pip install 'artifact[stem]'") from exc
    return PorterStemmer()


def strip_markup(card_text: str) -> str:
    """Remove YAML front matter, fenced code blocks and URLs."""
    text = _FRONT_MATTER.sub("", card_text, count=1)
    text = _CODE_FENCE.sub(" ", text)
    return _URL.sub(" ", text)


def preprocess(card_text: str | None, stem: bool = False) -> list[str]:
    """Turn raw card text into a list of lowercase content tokens.

    >>> preprocess("The BERT Model!")
    ['bert', 'model']
    """
    if not card_text:
        return []
    stop = stopwords()
    tokens = []
    for tok in _TOKEN.findall(strip_markup(card_text).lower()):
        if len(tok) < 2 or tok in stop:
            continue
        if stem:
            tok = _stemmer().stem(tok)
            if len(tok) < 2 or tok in stop or not tok.isalnum():
                continue
        tokens.append(tok)
    return tokens


def add_ngrams(tokens: Sequence[str], n_max: int) -> list[str]:
    """Append word n-grams (2..n_max) joined by a space to a unigram stream."""
    out = list(tokens)
    for n in range(2, n_max + 1):
        out.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return out


@dataclass(frozen=True)
class DocVector:
    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.indices)

    def items(self):
        return zip(self.indices, self.weights)

    def norm(self) -> float:
        return math.sqrt(math.fsum(w * w for w in self.weights))

    def scaled(self, k: float) -> "DocVector":
        return DocVector(self.indices, tuple(w * k for w in self.weights))


@dataclass(frozen=True)
class FeatureSpace:
    vocabulary: dict[str, int]
    idf: tuple[float, ...]
    n_docs_fitted: int
    _terms: tuple[str, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.idf) != len(self.vocabulary):
            raise ValueError("idf length must equal vocabulary size")
        terms = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        if [self.vocabulary[t] for t in terms] != list(range(len(terms))):
            raise ValueError("vocabulary indices must be 0..n-1")
        object.__setattr__(self, "_terms", tuple(terms))

    def __len__(self) -> int:
        return len(self.idf)

    @property
    def terms(self) -> tuple[str, ...]:
        return self._terms

    def to_dict(self) -> dict:
        return {
            "vocabulary": list(self._terms),
            "idf": list(self.idf),
            "n_docs_fitted": self.n_docs_fitted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSpace":
        terms = data["vocabulary"]
        return cls(
            vocabulary={t: i for i, t in enumerate(terms)},
            idf=tuple(float(x) for x in data["idf"]),
            n_docs_fitted=int(data["n_docs_fitted"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureSpace":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit(documents: Sequence[Sequence[str]], min_df: int = 2) -> FeatureSpace:
    """Learn vocabulary and IDF weights.

    Terms are kept when they occur in at least ``min_df`` documents and are
    indexed in order of first appearance.
    """
    if not documents:
        raise EmptyCorpus("cannot fit a feature space on zero documents")
    df: Counter = Counter()
    first_seen: dict[str, int] = {}
    for doc in documents:
        for tok in dict.fromkeys(doc):
            df[tok] += 1
            first_seen.setdefault(tok, len(first_seen))
    n = len(documents)
    terms = [t for t in first_seen if df[t] >= min_df]
    vocabulary = {t: i for i, t in enumerate(terms)}
    idf = tuple(math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms)
    return FeatureSpace(vocabulary=vocabulary, idf=idf, n_docs_fitted=n)


def transform(space: FeatureSpace, doc: Iterable[str]) -> DocVector:
    counts = Counter(tok for tok in doc if tok in space.vocabulary)
    if not counts:
        return DocVector()
    raw = sorted(
        (space.vocabulary[tok], (1.0 + math.log(tf)) * space.idf[space.vocabulary[tok]])
        for tok, tf in counts.items()
    )
    norm = math.sqrt(math.fsum(w * w for _, w in raw))
    return DocVector(tuple(i for i, _ in raw), tuple(w / norm for _, w in raw))


def transform_all(space: FeatureSpace, docs: Iterable[Iterable[str]]) -> list[DocVector]:
    return [transform(space, d) for d in docs]
