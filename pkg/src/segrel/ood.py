"""Out-of-distribution scoring against a fitted centroid model.

Two signals per sample: the raw nearest-centroid distance and the
centroid-distance score

    score = alpha * sum(d_hat of non-nearest) - beta * d_hat_nearest

where d_hat_i = d_i / max_j d_j. With alpha=1 and beta=k-1 the score is
bounded in [0, k-1]: it peaks when the sample sits on one centroid while
all other normalized distances are 1, and hits 0 when the sample is
equidistant from every centroid. Orientation (whether high means
"suspicious") is deliberately left to the consumer; fusion learns the
sign and reports can negate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import as_f64_vector
from .clustering import CentroidModel, squared_distances
from .datamodel import FeatureMatrix
from .errors import DataError


@dataclass(frozen=True)
class NcddParams:
    alpha: float = 1.0
    beta: float | None = None  # None -> k - 1 at evaluation time

    def __post_init__(self):
        if self.alpha <= 0:
            raise DataError(f"alpha must be > 0, got {self.alpha}")
        if self.beta is not None and self.beta <= 0:
            raise DataError(f"beta must be > 0, got {self.beta}")

    def resolved_beta(self, k: int) -> float:
        return float(k - 1) if self.beta is None else self.beta


@dataclass(frozen=True)
class OodScore:
    scene_id: str
    space_tag: str
    d_nearest: float
    d_hat: tuple[float, ...]
    ncdd: float
    nearest_index: int
    degenerate: bool = False  # all centroid distances were zero

    @property
    def normalized_distance(self) -> float:
        """d_hat of the nearest centroid (a Table-style score in its own
        right, distinct from the combined score)."""
        return self.d_hat[self.nearest_index]


def centroid_distances(
    model: CentroidModel, feature: np.ndarray
) -> tuple[np.ndarray, np.ndarray, int]:
    """Distances of one sample to every centroid.

    Returns (d, d_hat, nearest_index). d_hat is d / max(d); if every
    distance is zero (duplicate centroids only), d_hat is all zeros and a
    warning is issued.
    """
    x = as_f64_vector(feature)
    if x.shape[0] != model.n_features:
        raise DataError(f"feature dim {x.shape[0]} != model dim {model.n_features}")
    d = np.sqrt(squared_distances(x[None, :], model.centroids)[0])
    nearest = int(np.argmin(d))
    d_max = d.max()
    if d_max > 0:
        d_hat = d / d_max
    else:
        warnings.warn(
            "sample coincides with every centroid; normalized distances set to 0",
            stacklevel=2,
        )
        d_hat = np.zeros_like(d)
    return d, d_hat, nearest


def ncdd(d_hat: np.ndarray, params: NcddParams = NcddParams()) -> float:
    """Combined centroid-distance score from normalized distances."""
    d_hat = as_f64_vector(d_hat)
    k = d_hat.shape[0]
    if k < 2:
        raise DataError(f"need k >= 2 normalized distances, got {k}")
    if d_hat.min() < 0 or d_hat.max() > 1:
        raise DataError("normalized distances must lie in [0, 1]")
    nearest = int(np.argmin(d_hat))
    beta = params.resolved_beta(k)
    others = float(d_hat.sum() - d_hat[nearest])
    return params.alpha * others - beta * float(d_hat[nearest])


def score_population(
    model: CentroidModel,
    features: FeatureMatrix,
    params: NcddParams = NcddParams(),
) -> list[OodScore]:
    """One OodScore per sample, in the feature matrix's row order."""
    if features.space_tag != model.space_tag:
        raise DataError(
            f"feature space {features.space_tag!r} != model space {model.space_tag!r}"
        )
    if features.n_samples == 0:
        return []
    X = features.values
    sq = squared_distances(X, model.centroids)
    d_all = np.sqrt(sq)
    nearest_all = np.argmin(d_all, axis=1)
    beta = params.resolved_beta(model.k)

    out: list[OodScore] = []
    for row, scene_id in enumerate(features.sample_ids):
        d = d_all[row]
        nearest = int(nearest_all[row])
        d_max = d.max()
        degenerate = d_max == 0.0
        if degenerate:
            warnings.warn(
                f"{scene_id}: sample coincides with every centroid; "
                "normalized distances set to 0",
                stacklevel=2,
            )
            d_hat = np.zeros_like(d)
        else:
            d_hat = d / d_max
        others = float(d_hat.sum() - d_hat[nearest])
        score = params.alpha * others - beta * float(d_hat[nearest])
        out.append(
            OodScore(
                scene_id=scene_id,
                space_tag=features.space_tag,
                d_nearest=float(d[nearest]),
                d_hat=tuple(float(v) for v in d_hat),
                ncdd=score,
                nearest_index=nearest,
                degenerate=degenerate,
            )
        )
    return out


@dataclass(frozen=True)
class DistanceDensity:
    population: str
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        if edges.ndim != 1 or edges.shape[0] < 2 or not (np.diff(edges) > 0).all():
            raise DataError("bin edges must be strictly increasing, length >= 2")
        if len(self.counts) != edges.shape[0] - 1:
            raise DataError("need exactly one count per bin")


def density_summary(
    reference_scores: list[OodScore],
    downstream_scores: list[OodScore],
    bins: int = 30,
) -> tuple[DistanceDensity, DistanceDensity]:
    """Histograms of d_nearest on shared edges spanning [0, max of both]."""
    if not reference_scores or not downstream_scores:
        raise DataError("both populations must be nonempty")
    if bins < 2:
        raise DataError(f"bins must be >= 2, got {bins}")
    ref = np.array([s.d_nearest for s in reference_scores], dtype=np.float64)
    down = np.array([s.d_nearest for s in downstream_scores], dtype=np.float64)
    top = float(max(ref.max(), down.max()))
    if top == 0.0:
        top = 1.0  # degenerate all-zero populations still get valid edges
    edges = np.linspace(0.0, top, bins + 1)
    ref_counts, _ = np.histogram(ref, bins=edges)
    down_counts, _ = np.histogram(down, bins=edges)
    return (
        DistanceDensity("reference", tuple(edges), tuple(int(c) for c in ref_counts)),
        DistanceDensity("downstream", tuple(edges), tuple(int(c) for c in down_counts)),
    )


def scores_to_rows(scores: list[OodScore]) -> list[dict]:
    """Flat dict rows for CSV / report embedding."""
    return [
        {
            "scene_id": s.scene_id,
            "space": s.space_tag,
            "d_nearest": s.d_nearest,
            "normalized_distance": s.normalized_distance,
            "ncdd": s.ncdd,
            "nearest_index": s.nearest_index,
        }
        for s in scores
    ]
