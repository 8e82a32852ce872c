"""Complement Naive Bayes and one-vs-rest linear SVC over TF-IDF vectors.

Both models score a document ``x`` with one linear function per class and
predict the arg-max, lowest class index winning ties:

* CNB: ``f_c(x) = -sum_i x_i * ln(theta_{~c,i})`` where ``theta_{~c}`` is the
  smoothed feature distribution of every class *except* ``c``.
* SVC: ``f_c(x) = w_c . x + b_c``, each ``(w_c, b_c)`` minimising
  ``0.5 * ||w||^2 + C * sum_n max(0, 1 - y_n (w . x_n + b))``.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, SingleClassCorpus
from .features import DocVector

logger = logging.getLogger(__name__)

KINDS = ("CNB", "SVC")
SOLVERS = ("smo", "dcd")
_TAU = 1e-12
# Precompute the full Gram matrix below this many training documents.
_GRAM_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    kind: str
    classes: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    hyperparams: dict
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if not self.classes or len(set(self.classes)) != len(self.classes):
            raise ValueError("classes must be non-empty and duplicate-free")
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.classes):
            raise DimensionMismatch(
                f"weights shape {self.weights.shape} does not match {len(self.classes)} classes"
            )
        if self.bias.shape != (len(self.classes),):
            raise DimensionMismatch("bias must have one entry per class")

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "classes": list(self.classes),
            "n_features": self.n_features,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "hyperparams": dict(self.hyperparams),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierModel":
        classes = tuple(data["classes"])
        weights = np.asarray(data["weights"], dtype=float).reshape(len(classes), data["n_features"])
        return cls(
            kind=data["kind"],
            classes=classes,
            weights=weights,
            bias=np.asarray(data["bias"], dtype=float),
            hyperparams=dict(data["hyperparams"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def same_parameters(self, other: "ClassifierModel") -> bool:
        return (
            self.kind == other.kind
            and self.classes == other.classes
            and self.hyperparams == other.hyperparams
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )


def to_matrix(vectors, n_features: int | None = None) -> sp.csr_matrix:
    """Stack DocVectors (or dense rows) into a CSR matrix."""
    if sp.issparse(vectors):
        X = sp.csr_matrix(vectors, dtype=float)
    elif isinstance(vectors, np.ndarray):
        X = sp.csr_matrix(np.atleast_2d(vectors).astype(float))
    else:
        vectors = list(vectors)
        if vectors and not isinstance(vectors[0], DocVector):
            X = sp.csr_matrix(np.atleast_2d(np.asarray(vectors, dtype=float)))
        else:
            indptr = [0]
            indices: list[int] = []
            data: list[float] = []
            for v in vectors:
                indices.extend(v.indices)
                data.extend(v.weights)
                indptr.append(len(indices))
            width = max(indices, default=-1) + 1
            if n_features is not None:
                width = max(width, n_features)
            X = sp.csr_matrix(
                (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), indptr),
                shape=(len(vectors), width),
            )
    if n_features is not None and X.shape[1] != n_features:
        if X.shape[1] > n_features:
            raise DimensionMismatch(
                f"input has {X.shape[1]} features, model expects {n_features}"
            )
        X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], n_features))
    return X


def _class_index(labels: Sequence[str], n_rows: int) -> tuple[tuple[str, ...], np.ndarray]:
    if len(labels) != n_rows:
        raise DimensionMismatch(f"{n_rows} vectors but {len(labels)} labels")
    if n_rows == 0:
        raise SingleClassCorpus("no training documents")
    classes = tuple(dict.fromkeys(labels))
    if len(classes) < 2:
        raise SingleClassCorpus(f"need at least two classes, got {classes}")
    lookup = {c: i for i, c in enumerate(classes)}
    return classes, np.fromiter((lookup[y] for y in labels), dtype=np.int64, count=n_rows)


def train_cnb(
    vectors,
    labels: Sequence[str],
    smoothing: float = 1.0,
    normalize_weights: bool = False,
    n_features: int | None = None,
) -> ClassifierModel:
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    X = to_matrix(vectors, n_features)
    classes, y = _class_index(labels, X.shape[0])
    n_cls, d = len(classes), X.shape[1]
    # column c of `outside` marks every document not labelled c
    outside = 1.0 - np.eye(n_cls)[y]
    comp = np.asarray(X.T @ outside).T
    theta = (comp + smoothing) / (comp.sum(axis=1, keepdims=True) + smoothing * d)
    weights = np.log(theta)
    if normalize_weights:
        weights = weights / np.abs(weights).sum(axis=1, keepdims=True)
    return ClassifierModel(
        kind="CNB",
        classes=classes,
        weights=weights,
        bias=np.zeros(n_cls),
        hyperparams={"smoothing": float(smoothing), "normalize_weights": bool(normalize_weights)},
    )


def hinge_objective(w: np.ndarray, b: float, X, y: np.ndarray, C: float) -> float:
    """``0.5 ||w||^2 + C * sum(max(0, 1 - y (Xw + b)))`` for one binary problem."""
    margins = y * (np.asarray(X @ w).ravel() + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


class _Gram:
    """Gram-matrix columns, precomputed for small problems."""

    def __init__(self, X: sp.csr_matrix):
        self.X = X
        self.diag = np.asarray(X.multiply(X).sum(axis=1)).ravel()
        self.full = (X @ X.T).toarray() if X.shape[0] <= _GRAM_LIMIT else None
        self._cache: dict[int, np.ndarray] = {}

    def column(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[:, i]
        col = self._cache.get(i)
        if col is None:
            if len(self._cache) > 256:
                self._cache.clear()
            col = np.asarray((self.X @ self.X[i].T).todense()).ravel()
            self._cache[i] = col
        return col


def _smo(gram: _Gram, y: np.ndarray, C: float, max_iter: int, tol: float, checkpoint_every: int):
    """Solve the bias-constrained SVM dual by sequential minimal optimisation.

    Working pairs follow the second-order selection of Fan, Chen & Lin (2005).
    Returns ``(alpha, bias, dual_checkpoints, iterations, converged)``.
    """
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    checkpoints = [0.0]
    converged = False
    it = 0
    while it < max_iter:
        v = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        g_max = v_up[i]
        g_min = np.min(np.where(low, v, np.inf))
        if g_max - g_min < tol:
            converged = True
            break
        k_i = gram.column(i)
        b_diff = g_max - v
        cand = low & (b_diff > 0)
        quad = gram.diag[i] + gram.diag - 2.0 * k_i
        quad = np.where(quad > 0, quad, _TAU)
        score = np.where(cand, -(b_diff * b_diff) / quad, np.inf)
        j = int(np.argmin(score))
        k_j = gram.column(j)

        old_i, old_j = alpha[i], alpha[j]
        q_ij = y[i] * y[j] * k_i[j]
        if y[i] != y[j]:
            quad_coef = gram.diag[i] + gram.diag[j] + 2.0 * q_ij
            if quad_coef <= 0:
                quad_coef = _TAU
            delta = (-grad[i] - grad[j]) / quad_coef
            diff = old_i - old_j
            a_i, a_j = old_i + delta, old_j + delta
            if diff > 0:
                if a_j < 0:
                    a_j, a_i = 0.0, diff
            elif a_i < 0:
                a_i, a_j = 0.0, -diff
            if diff > 0:
                if a_i > C:
                    a_i, a_j = C, C - diff
            elif a_j > C:
                a_j, a_i = C, C + diff
        else:
            quad_coef = gram.diag[i] + gram.diag[j] - 2.0 * q_ij
            if quad_coef <= 0:
                quad_coef = _TAU
            delta = (grad[i] - grad[j]) / quad_coef
            total = old_i + old_j
            a_i, a_j = old_i - delta, old_j + delta
            if total > C:
                if a_i > C:
                    a_i, a_j = C, total - C
                if a_j > C:
                    a_j, a_i = C, total - C
            else:
                if a_j < 0:
                    a_j, a_i = 0.0, total
                if a_i < 0:
                    a_i, a_j = 0.0, total
        alpha[i], alpha[j] = a_i, a_j
        grad += y * (y[i] * (a_i - old_i) * k_i + y[j] * (a_j - old_j) * k_j)
        it += 1
        if it % checkpoint_every == 0:
            checkpoints.append(0.5 * float(alpha @ (grad - 1.0)))

    # bias from the KKT conditions, averaging over free support vectors
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else math.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -math.inf
        rho = (ub + lb) / 2.0 if math.isfinite(ub + lb) else 0.0
    checkpoints.append(0.5 * float(alpha @ (grad - 1.0)))
    return alpha, -rho, checkpoints, it, converged


def _dcd(X: sp.csr_matrix, y: np.ndarray, C: float, epochs: int, tol: float, rng: random.Random,
         bias_scale: float = 1.0):
    """Dual coordinate descent (Hsieh et al., 2008) with the bias as an extra
    constant feature, so the bias is lightly regularised.

    Returns ``(w, bias, dual_checkpoints, epochs_run, converged)``.
    """
    n, d = X.shape
    indptr, indices, data = X.indptr, X.indices, X.data
    w = np.zeros(d)
    wb = 0.0
    alpha = np.zeros(n)
    qd = np.asarray(X.multiply(X).sum(axis=1)).ravel() + bias_scale**2
    order = list(range(n))
    checkpoints = [0.0]
    converged = False
    run = 0
    for run in range(1, epochs + 1):
        rng.shuffle(order)
        pg_max, pg_min = -math.inf, math.inf
        for s in order:
            lo, hi = indptr[s], indptr[s + 1]
            idx, val = indices[lo:hi], data[lo:hi]
            g = y[s] * (float(w[idx] @ val) + wb * bias_scale) - 1.0
            a = alpha[s]
            if a <= 0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max, pg_min = max(pg_max, pg), min(pg_min, pg)
            if abs(pg) > 1e-12:
                new = min(max(a - g / qd[s], 0.0), C)
                step = (new - a) * y[s]
                alpha[s] = new
                w[idx] += step * val
                wb += step * bias_scale
        dual = 0.5 * (float(w @ w) + wb * wb) - float(alpha.sum())
        checkpoints.append(dual)
        if pg_max - pg_min < tol:
            converged = True
            break
    return w, wb * bias_scale, checkpoints, run, converged


def train_svc(
    vectors,
    labels: Sequence[str],
    C: float = 1.0,
    epochs: int = 50,
    seed: int = 0,
    *,
    solver: str = "smo",
    tol: float = 1e-5,
    n_features: int | None = None,
) -> ClassifierModel:
    """Train one binary hinge-loss SVM per class (one-vs-rest).

    ``solver="smo"`` solves the exact problem (unregularised bias) and caps
    work at ``epochs * n_samples`` pair updates. ``solver="dcd"`` runs
    ``epochs`` passes of dual coordinate descent and scales to large sparse
    corpora. ``seed`` fixes the sample order, so training is deterministic.
    Failing to reach ``tol`` is logged and recorded in ``model.info``; the
    last iterate is returned.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    X = to_matrix(vectors, n_features)
    classes, y_idx = _class_index(labels, X.shape[0])
    n = X.shape[0]
    perm = list(range(n))
    random.Random(seed).shuffle(perm)
    Xp = X[perm]
    y_perm = y_idx[perm]
    gram = _Gram(Xp) if solver == "smo" else None

    weights = np.zeros((len(classes), X.shape[1]))
    bias = np.zeros(len(classes))
    info = {"solver": solver, "per_class": {}}
    for c, name in enumerate(classes):
        y = np.where(y_perm == c, 1.0, -1.0)
        if solver == "smo":
            alpha, b, checkpoints, iters, ok = _smo(
                gram, y, C, max_iter=epochs * n, tol=tol, checkpoint_every=n
            )
            w = np.asarray(Xp.T @ (alpha * y)).ravel()
        else:
            w, b, checkpoints, iters, ok = _dcd(Xp, y, C, epochs, tol, random.Random(seed + c))
        if not ok:
            logger.warning("SVC for class %r stopped before reaching tol=%g", name, tol)
        weights[c] = w
        bias[c] = b
        info["per_class"][name] = {
            "dual_objective": checkpoints,
            "primal_objective": hinge_objective(w, b, Xp, y, C),
            "iterations": iters,
            "converged": ok,
        }
    return ClassifierModel(
        kind="SVC",
        classes=classes,
        weights=weights,
        bias=bias,
        hyperparams={"C": float(C), "epochs": int(epochs), "seed": int(seed), "solver": solver,
                     "tol": float(tol)},
        info=info,
    )


def predict_scores_batch(model: ClassifierModel, vectors) -> np.ndarray:
    X = to_matrix(vectors, model.n_features)
    raw = np.asarray(X @ model.weights.T)
    if model.kind == "CNB":
        return -raw
    return raw + model.bias


def predict_scores(model: ClassifierModel, vector) -> np.ndarray:
    return predict_scores_batch(model, [vector] if isinstance(vector, DocVector) else vector)[0]


def predict(model: ClassifierModel, vector) -> str:
    return model.classes[int(np.argmax(predict_scores(model, vector)))]


def predict_batch(model: ClassifierModel, vectors) -> list[str]:
    scores = predict_scores_batch(model, vectors)
    if scores.shape[0] == 0:
        return []
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


def train(kind: str, vectors, labels, n_features: int | None = None, **params) -> ClassifierModel:
    kind = kind.upper()
    if kind == "CNB":
        return train_cnb(
            vectors,
            labels,
            smoothing=params.get("smoothing", 1.0),
            normalize_weights=params.get("normalize_weights", False),
            n_features=n_features,
        )
    if kind == "SVC":
        return train_svc(
            vectors,
            labels,
            C=params.get("C", 1.0),
            epochs=params.get("epochs", 50),
            seed=params.get("seed", 0),
            solver=params.get("solver", "smo"),
            tol=params.get("tol", 1e-5),
            n_features=n_features,
        )
    raise ValueError(f"unknown classifier kind {kind!r}")
