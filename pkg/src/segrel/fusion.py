"""Learned fusion of reliability flags into a single failure score.

A scene is labeled a failure when its F1 falls below a user-chosen
threshold. An L2-regularized logistic model over z-scored reliability
features predicts that label; its probability output is the combined
discard score. Training is deterministic: weights start at zero and
full-batch gradient descent with backtracking line search runs until
the gradient is flat. The bias is never penalized, so under heavy
regularization the model falls back to the base failure rate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_f64_matrix, check_binary
from .datamodel import SceneRecord
from .errors import DataError


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature names plus train-split standardization stats."""

    feature_names: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    dropped: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("duplicate feature names")
        if not (len(self.feature_names) == len(self.means) == len(self.stds)):
            raise DataError("names, means and stds must align")
        if any(s <= 0 for s in self.stds):
            raise DataError("stds must be > 0 (zero-variance features are dropped)")


def _raw_matrix(
    records: Sequence[SceneRecord], feature_names: Sequence[str]
) -> np.ndarray:
    missing: dict[str, list[str]] = {}
    rows = []
    for rec in records:
        row = []
        for name in feature_names:
            value = rec.scores.get(name)
            if value is None:
                missing.setdefault(name, []).append(rec.scene_id)
            else:
                row.append(float(value))
        rows.append(row)
    if missing:
        detail = "; ".join(
            f"{name}: {', '.join(scenes)}" for name, scenes in sorted(missing.items())
        )
        raise DataError(f"missing feature values: {detail}")
    return np.asarray(rows, dtype=np.float64).reshape(len(records), len(feature_names))


def fit_feature_spec(
    records: Sequence[SceneRecord], feature_names: Sequence[str]
) -> FeatureSpec:
    """Standardization stats from the training records; zero-variance
    features are dropped with a warning."""
    names = tuple(feature_names)
    X = _raw_matrix(records, names)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    keep = stds > 0
    dropped = tuple(n for n, k in zip(names, keep) if not k)
    if dropped:
        warnings.warn(
            f"dropping zero-variance features: {', '.join(dropped)}", stacklevel=2
        )
    kept = tuple(n for n, k in zip(names, keep) if k)
    return FeatureSpec(
        feature_names=kept,
        means=tuple(float(v) for v in means[keep]),
        stds=tuple(float(v) for v in stds[keep]),
        dropped=dropped,
    )


def build_features(records: Sequence[SceneRecord], spec: FeatureSpec) -> np.ndarray:
    """Design matrix z-scored with the FeatureSpec's (train-split) stats."""
    X = _raw_matrix(records, spec.feature_names)
    if X.shape[1] == 0:
        return X
    return (X - np.asarray(spec.means)) / np.asarray(spec.stds)


def failure_labels(
    per_scene_f1: Sequence[Optional[float]], failure_threshold: float = 0.5
) -> np.ndarray:
    """y = 1 iff F1 < threshold; scenes with undefined F1 count as
    failures (degenerate scenes are exactly what the flag must catch)."""
    if not 0.0 < failure_threshold < 1.0:
        raise DataError(
            f"failure threshold must be in (0,1), got {failure_threshold}"
        )
    return np.array(
        [1 if (f is None or f < failure_threshold) else 0 for f in per_scene_f1],
        dtype=np.int64,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _loss_and_grad(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float
) -> tuple[float, np.ndarray, float]:
    n = X.shape[0]
    z = X @ w + b
    # mean softplus(z) - y*z is the stable cross-entropy form
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    p = _sigmoid(z)
    gw = X.T @ (p - y) / n + l2 * w
    gb = float(np.mean(p - y))
    return loss, gw, gb


@dataclass(frozen=True)
class Combiner:
    feature_names: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    weights: tuple[float, ...]
    bias: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != len(self.feature_names):
            raise DataError("one weight per feature required")
        if not all(math.isfinite(w) for w in (*self.weights, self.bias)):
            raise DataError("weights and bias must be finite")


def train_combiner(
    X,
    y,
    l2: float = 1e-3,
    seed: int = 0,
    max_iter: int = 5000,
    tol: float = 1e-6,
    *,
    feature_spec: Optional[FeatureSpec] = None,
    failure_threshold: float = 0.5,
) -> Combiner:
    """Fit the logistic failure model on a standardized design matrix.

    Minimizes mean cross-entropy + l2*||w||^2/2 (bias unpenalized) by
    full-batch gradient descent with backtracking line search; stops when
    the gradient infinity-norm drops below tol. Deterministic: weights
    start at zero, so the seed is recorded for provenance only.
    """
    X = as_f64_matrix(X) if np.asarray(X).size else np.asarray(X, dtype=np.float64)
    y = check_binary(np.asarray(y).reshape(-1), "labels").astype(np.float64)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X rows {X.shape[0]} != labels {y.shape[0]}")
    if X.shape[0] < 2:
        raise DataError("need at least 2 training scenes")
    if y.min() == y.max():
        raise DataError("training labels are single-class; cannot fit")
    if l2 < 0:
        raise DataError(f"l2 must be >= 0, got {l2}")

    w = np.zeros(X.shape[1])
    b = 0.0
    loss, gw, gb = _loss_and_grad(X, y, w, b, l2)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        gnorm = max(float(np.abs(gw).max()) if gw.size else 0.0, abs(gb))
        if gnorm < tol:
            iterations -= 1
            break
        step = 1.0
        gsq = float(gw @ gw) + gb * gb
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = _loss_and_grad(X, y, w_new, b_new, l2)
            if loss_new <= loss - 1e-4 * step * gsq or step < 1e-16:
                break
            step *= 0.5
        if loss_new > loss + 1e-12:
            raise AssertionError(
                f"line search accepted an increase: {loss} -> {loss_new}"
            )
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new

    if feature_spec is not None:
        names, means, stds = (
            feature_spec.feature_names,
            feature_spec.means,
            feature_spec.stds,
        )
    else:
        names = tuple(f"x{i}" for i in range(X.shape[1]))
        means = tuple(0.0 for _ in range(X.shape[1]))
        stds = tuple(1.0 for _ in range(X.shape[1]))
    return Combiner(
        feature_names=names,
        means=means,
        stds=stds,
        weights=tuple(float(v) for v in w),
        bias=float(b),
        meta={
            "l2": l2,
            "iterations": iterations,
            "final_loss": loss,
            "seed": seed,
            "failure_threshold": failure_threshold,
        },
    )


def combiner_score(model: Combiner, x) -> np.ndarray | float:
    """Failure probability sigmoid(w.x + b) for one standardized feature
    vector or a matrix of them."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = arr[None, :] if single else arr
    if X.shape[1] != len(model.weights):
        raise DataError(
            f"feature dim {X.shape[1]} != model dim {len(model.weights)}"
        )
    p = _sigmoid(X @ np.asarray(model.weights) + model.bias)
    return float(p[0]) if single else p


def score_records(model: Combiner, records: Sequence[SceneRecord]) -> np.ndarray:
    """Failure probabilities from raw records, applying the model's own
    standardization stats."""
    spec = FeatureSpec(model.feature_names, model.means, model.stds)
    X = build_features(records, spec)
    if X.shape[1] == 0:
        return np.full(len(records), _sigmoid(np.array([model.bias]))[0])
    return combiner_score(model, X)


def save_combiner(model: Combiner, path: str | Path) -> None:
    payload = {
        "feature_names": list(model.feature_names),
        "means": list(model.means),
        "stds": list(model.stds),
        "weights": list(model.weights),
        "bias": model.bias,
        "meta": model.meta,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_combiner(path: str | Path) -> Combiner:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Combiner(
        feature_names=tuple(payload["feature_names"]),
        means=tuple(payload["means"]),
        stds=tuple(payload["stds"]),
        weights=tuple(payload["weights"]),
        bias=float(payload["bias"]),
        meta=payload.get("meta", {}),
    )


def select_threshold(
    scores: Sequence[float],
    labels: Sequence[int],
    objective: str = "detection_f1",
    target_coverage: Optional[float] = None,
) -> float:
    """Scan midpoints of the sorted unique scores and return the best
    threshold (discard iff score > threshold).

    Objectives: ``detection_f1`` maximizes the F1 of flagged-vs-failed;
    ``coverage`` gets retained coverage closest to ``target_coverage``.
    Ties go to the higher-coverage (larger) threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = check_binary(np.asarray(labels).reshape(-1), "labels")
    if s.shape[0] != y.shape[0]:
        raise DataError("scores and labels must align")
    if s.shape[0] == 0:
        raise DataError("cannot select a threshold from no scores")
    if objective not in ("detection_f1", "coverage"):
        raise DataError(f"unknown objective {objective!r}")
    if objective == "detection_f1" and y.min() == y.max():
        raise DataError("detection objective needs both classes present")
    if objective == "coverage":
        if target_coverage is None or not 0.0 <= target_coverage <= 1.0:
            raise DataError("coverage objective needs target_coverage in [0,1]")

    unique = np.unique(s)
    if unique.shape[0] == 1:
        warnings.warn(
            "all scores equal; threshold selection has a single candidate",
            stacklevel=2,
        )
        candidates = [float(unique[0])]
    else:
        candidates = [
            float((a + b) / 2.0) for a, b in zip(unique[:-1], unique[1:])
        ]

    best_t = candidates[0]
    best_val = -math.inf
    for t in candidates:  # ascending, so >= ties prefer higher coverage
        flagged = s > t
        if objective == "detection_f1":
            tp = int((flagged & (y == 1)).sum())
            fp = int((flagged & (y == 0)).sum())
            fn = int((~flagged & (y == 1)).sum())
            val = 2 * tp / (2 * tp + fp + fn)
        else:
            coverage = float((~flagged).mean())
            val = -abs(coverage - target_coverage)
        if val >= best_val:
            best_val = val
            best_t = t
    return best_t


def stratified_split(
    labels: Sequence[int], seed: int, train_frac: float = 0.7
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified train/eval index split.

    Each class is shuffled and split at round(train_frac * class size),
    keeping at least one scene per class in train and, when the class
    has two or more, at least one in eval.
    """
    y = check_binary(np.asarray(labels).reshape(-1), "labels")
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must be in (0,1), got {train_frac}")
    rng = np.random.Generator(np.random.PCG64(seed))
    train_idx: list[int] = []
    eval_idx: list[int] = []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if members.size == 0:
            continue
        members = members[rng.permutation(members.size)]
        n_train = int(math.floor(train_frac * members.size + 0.5))
        n_train = max(1, min(n_train, members.size - 1)) if members.size > 1 else 1
        train_idx.extend(int(i) for i in members[:n_train])
        eval_idx.extend(int(i) for i in members[n_train:])
    return np.array(sorted(train_idx)), np.array(sorted(eval_idx))


class LogisticCombiner(ClassifierMixin, BaseEstimator):
    """Estimator-style wrapper over the logistic failure model.

    fit expects an already-standardized design matrix; use
    fit_feature_spec/build_features for the standardization step.
    """

    def __init__(self, l2: float = 1e-3, max_iter: int = 5000, tol: float = 1e-6):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        self.model_ = train_combiner(
            X, y, l2=self.l2, max_iter=self.max_iter, tol=self.tol
        )
        self.coef_ = np.asarray(self.model_.weights)
        self.intercept_ = self.model_.bias
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        p1 = np.atleast_1d(combiner_score(self.model_, as_f64_matrix(X)))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
