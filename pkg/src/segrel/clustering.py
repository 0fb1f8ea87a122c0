"""Reference-distribution centroid model.

A hand-rolled Lloyd k-means with k-means++ seeding, written for exact
reproducibility: distances in float64, deterministic tie-breaking
(lowest index wins), empty clusters re-seeded to the farthest point,
and run-to-run identical results for a fixed (data, k, seed).

The estimator follows the sklearn fit/predict/transform conventions so
it composes with pipelines; the numerical core does not call into
sklearn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_f64_matrix
from .datamodel import SPACE_TAGS, FeatureMatrix
from .errors import ChecksumError, DataError, UnsupportedVersionError
from .manifest import file_sha256
from .tensorfile import read_tensor, write_tensor

MODEL_FORMAT_VERSION = 1


def squared_distances(X: np.ndarray, C: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Exact pairwise squared Euclidean distances, N x k, in float64.

    Computed as explicit differences (not the expanded dot-product form)
    so constructed equidistant points tie exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    out = np.empty((X.shape[0], C.shape[0]), dtype=np.float64)
    for start in range(0, X.shape[0], chunk):
        block = X[start : start + chunk]
        diff = block[:, None, :] - C[None, :, :]
        out[start : start + chunk] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = squared_distances(X, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        # distinct-point precheck guarantees some positive mass remains
        idx = int(rng.choice(n, p=closest / total))
        centers[j] = X[idx]
        closest = np.minimum(closest, squared_distances(X, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    """Lloyd iterations from a given init; returns (centers, labels, wcss,
    iterations, per-iteration wcss path)."""
    k = centers.shape[0]
    wcss_path: list[float] = []
    labels = None
    wcss = math.inf
    for iteration in range(1, max_iter + 1):
        sq = squared_distances(X, centers)
        labels = np.argmin(sq, axis=1)  # argmin takes the lowest index on ties
        wcss = float(sq[np.arange(X.shape[0]), labels].sum())
        if wcss_path and wcss > wcss_path[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(
                f"Lloyd objective increased: {wcss_path[-1]} -> {wcss}"
            )
        wcss_path.append(wcss)

        new_centers = np.zeros_like(centers)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        np.add.at(new_centers, labels, X)
        nonempty = counts > 0
        new_centers[nonempty] /= counts[nonempty, None]

        empty = np.flatnonzero(~nonempty)
        if empty.size:
            # each empty slot grabs the point currently farthest from its
            # own centroid; already-taken points are excluded
            own = sq[np.arange(X.shape[0]), labels].copy()
            for j in empty:
                far = int(np.argmax(own))
                new_centers[j] = X[far]
                own[far] = -1.0

        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if movement < tol:
            break

    # final pass so labels/wcss describe the returned centers
    sq = squared_distances(X, centers)
    labels = np.argmin(sq, axis=1)
    final_wcss = float(sq[np.arange(X.shape[0]), labels].sum())
    if final_wcss < wcss:
        wcss_path.append(final_wcss)
    return centers, labels, min(wcss, final_wcss), iteration, wcss_path


class KMeans(TransformerMixin, ClusterMixin, BaseEstimator):
    """Deterministic Lloyd k-means with k-means++ restarts.

    Parameters mirror the sklearn estimator of the same name; results are
    bitwise-reproducible for a fixed (X, n_clusters, random_state).

    Attributes after fit: ``cluster_centers_``, ``labels_``, ``inertia_``,
    ``n_iter_``, ``wcss_path_`` (per-iteration objective of the winning
    restart, nonincreasing).
    """

    def __init__(
        self,
        n_clusters: int = 15,
        *,
        random_state: int = 0,
        n_init: int = 10,
        max_iter: int = 300,
        tol: float = 1e-6,
    ):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None, init: np.ndarray | None = None):
        X = as_f64_matrix(X)
        k = self.n_clusters
        if k < 1:
            raise DataError(f"n_clusters must be >= 1, got {k}")
        if X.shape[0] < k:
            raise DataError(f"need at least k={k} samples, got {X.shape[0]}")
        if k > 1 and np.unique(X, axis=0).shape[0] < k:
            raise DataError(
                f"fewer than k={k} distinct points; cannot form k nonempty clusters"
            )

        if init is not None:
            starts = [np.asarray(init, dtype=np.float64)]
        else:
            children = np.random.SeedSequence(self.random_state).spawn(self.n_init)
            starts = [
                _kmeanspp_init(X, k, np.random.Generator(np.random.PCG64(c)))
                for c in children
            ]

        best = None
        for centers0 in starts:
            result = _lloyd(X, centers0, self.max_iter, self.tol)
            if best is None or result[2] < best[2]:
                best = result
        centers, labels, wcss, n_iter, path = best
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = wcss
        self.n_iter_ = n_iter
        self.wcss_path_ = path
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_")
        X = as_f64_matrix(X)
        if X.shape[1] != self.cluster_centers_.shape[1]:
            raise DataError(
                f"feature dim {X.shape[1]} != model dim {self.cluster_centers_.shape[1]}"
            )
        return np.argmin(squared_distances(X, self.cluster_centers_), axis=1)

    def transform(self, X) -> np.ndarray:
        """Euclidean distance of each sample to every centroid."""
        check_is_fitted(self, "cluster_centers_")
        X = as_f64_matrix(X)
        if X.shape[1] != self.cluster_centers_.shape[1]:
            raise DataError(
                f"feature dim {X.shape[1]} != model dim {self.cluster_centers_.shape[1]}"
            )
        return np.sqrt(squared_distances(X, self.cluster_centers_))


@dataclass(frozen=True)
class CentroidModel:
    """Fitted reference model: the centroids plus fit provenance."""

    centroids: np.ndarray
    space_tag: str
    fit_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 2:
            raise DataError(
                f"centroids must be k x D with k >= 2, got shape {centroids.shape}"
            )
        if not np.isfinite(centroids).all():
            raise DataError("centroids must be finite")
        if self.space_tag not in SPACE_TAGS:
            raise DataError(f"space_tag must be one of {SPACE_TAGS}")
        if self.fit_meta.get("wcss", 0.0) < 0:
            raise DataError("wcss must be >= 0")
        centroids.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]


def fit_reference_model(
    features: FeatureMatrix,
    k: int,
    seed: int,
    *,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> CentroidModel:
    """Fit the reference centroid model on a feature matrix.

    Rows are brought into canonical order (sample_ids sorted) before
    seeding, so the result is invariant to the stored row order.
    """
    if k < 2:
        raise DataError(f"reference model needs k >= 2, got {k}")
    canonical = features.canonical_order()
    est = KMeans(
        n_clusters=k, random_state=seed, n_init=n_init, max_iter=max_iter, tol=tol
    ).fit(canonical.values)
    return CentroidModel(
        centroids=est.cluster_centers_,
        space_tag=features.space_tag,
        fit_meta={
            "seed": seed,
            "iterations_run": est.n_iter_,
            "wcss": est.inertia_,
            "feature_dim": features.n_features,
        },
    )


def assign(model: CentroidModel, features) -> np.ndarray:
    """Nearest-centroid index per sample (ties -> lowest index)."""
    X = features.values if isinstance(features, FeatureMatrix) else as_f64_matrix(features)
    if X.shape[1] != model.n_features:
        raise DataError(f"feature dim {X.shape[1]} != model dim {model.n_features}")
    return np.argmin(squared_distances(X, model.centroids), axis=1)


def save_model(model: CentroidModel, path_base: str | Path) -> tuple[Path, Path]:
    """Persist as '<base>.shrt' (centroids) + '<base>.meta.json'."""
    base = Path(path_base)
    tensor_path = base.with_suffix(".shrt")
    meta_path = base.with_suffix(".meta.json")
    write_tensor(model.centroids, tensor_path)
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "k": model.k,
        "space_tag": model.space_tag,
        "fit_meta": model.fit_meta,
        "centroids_sha256": file_sha256(tensor_path),
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return tensor_path, meta_path


def load_model(path_base: str | Path) -> CentroidModel:
    base = Path(path_base)
    tensor_path = base.with_suffix(".shrt")
    meta_path = base.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{meta_path}: model format {meta.get('format_version')}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    actual = file_sha256(tensor_path)
    if actual != meta.get("centroids_sha256"):
        raise ChecksumError(f"{tensor_path}: centroid payload corrupted")
    centroids = read_tensor(tensor_path, require_finite=True)
    if centroids.shape[0] != meta["k"]:
        raise DataError(f"{tensor_path}: k mismatch between tensor and metadata")
    return CentroidModel(
        centroids=centroids, space_tag=meta["space_tag"], fit_meta=meta["fit_meta"]
    )


@dataclass(frozen=True)
class ElbowScan:
    candidate_ks: tuple[int, ...]
    wcss_per_k: tuple[float, ...]
    chosen_k: int


def choose_elbow(candidate_ks, wcss_per_k) -> int:
    """Pick k at the largest discrete second difference of the WCSS
    profile; interior candidates only, ties toward smaller k."""
    ks = list(candidate_ks)
    w = list(wcss_per_k)
    if len(ks) < 3 or len(ks) != len(w):
        raise DataError("elbow selection needs >= 3 (k, wcss) candidates")
    best_i = None
    best_val = -math.inf
    for i in range(1, len(ks) - 1):
        val = w[i - 1] - 2.0 * w[i] + w[i + 1]
        if val > best_val:
            best_val = val
            best_i = i
    return ks[best_i]


def _farthest_augment(X: np.ndarray, centers: np.ndarray, extra: int) -> np.ndarray:
    out = centers
    closest = squared_distances(X, out).min(axis=1)
    for _ in range(extra):
        far = int(np.argmax(closest))
        out = np.vstack([out, X[far]])
        closest = np.minimum(closest, squared_distances(X, out[-1:])[:, 0])
    return out


def select_k_elbow(
    features: FeatureMatrix | np.ndarray,
    candidate_ks,
    seed: int,
    *,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ElbowScan:
    """Fit every candidate k and choose the elbow of the WCSS profile.

    Besides the seeded k-means++ restarts, each k also tries a warm start
    grown from the previous k's solution (previous centroids plus
    farthest-point additions). Lloyd never increases its objective, so
    the recorded profile is nonincreasing in k by construction.
    """
    ks = [int(k) for k in candidate_ks]
    if len(ks) < 3:
        raise DataError("need at least 3 candidate ks")
    if ks != sorted(ks) or len(set(ks)) != len(ks):
        raise DataError("candidate_ks must be strictly ascending")
    if min(ks) < 2:
        raise DataError("candidate ks must be >= 2")
    if isinstance(features, FeatureMatrix):
        X = features.canonical_order().values
    else:
        X = as_f64_matrix(features)
    if min(ks) > X.shape[0]:
        raise DataError("smallest candidate k exceeds the sample count")

    wcss: list[float] = []
    prev_centers = None
    for k in ks:
        est = KMeans(
            n_clusters=k, random_state=seed, n_init=n_init, max_iter=max_iter, tol=tol
        ).fit(X)
        best_wcss, best_centers = est.inertia_, est.cluster_centers_
        if prev_centers is not None and k > prev_centers.shape[0]:
            warm = _farthest_augment(X, prev_centers, k - prev_centers.shape[0])
            warm_est = KMeans(
                n_clusters=k, random_state=seed, n_init=1, max_iter=max_iter, tol=tol
            ).fit(X, init=warm)
            if warm_est.inertia_ < best_wcss:
                best_wcss, best_centers = warm_est.inertia_, warm_est.cluster_centers_
        wcss.append(best_wcss)
        prev_centers = best_centers

    return ElbowScan(
        candidate_ks=tuple(ks),
        wcss_per_k=tuple(wcss),
        chosen_k=choose_elbow(ks, wcss),
    )
