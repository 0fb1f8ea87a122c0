"""Ensemble uncertainty maps and their image-level aggregation.

Four per-pixel metrics from an M-member probability stack, all in nats:

    mean_prob     p_bar = (1/M) sum p_i
    entropy       H(p_bar), binary entropy with 0*ln(0) := 0
    variance      (1/M) sum (p_i - p_bar)^2        (population divisor)
    mutual_info   H(p_bar) - (1/M) sum H(p_i)      (clamped at 0)

Image-level scores average one metric over a region of interest: the
pixels whose mean probability clears a threshold, with configurable
fallback when nothing does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datamodel import PredictionStack
from .errors import DataError

METRIC_NAMES = ("mean_prob", "entropy", "variance", "mutual_info")

ENTROPY_MAX = math.log(2.0)
VARIANCE_MAX = 0.25

# largest negative excursion tolerated before the mutual-info clamp
_MI_CLAMP_SLACK = 1e-12


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """Two-class entropy in nats, 0*ln(0) := 0 at the endpoints."""
    p = np.asarray(p, dtype=np.float64)
    return -_xlogx(p) - _xlogx(1.0 - p)


@dataclass(frozen=True)
class PixelMetrics:
    scene_id: str
    mean_prob: np.ndarray
    entropy: np.ndarray
    variance: np.ndarray
    mutual_info: np.ndarray

    def by_name(self, metric_name: str) -> np.ndarray:
        if metric_name not in METRIC_NAMES:
            raise DataError(
                f"unknown metric {metric_name!r}; expected one of {METRIC_NAMES}"
            )
        return getattr(self, metric_name)


def pixel_metrics(stack: PredictionStack) -> PixelMetrics:
    probs = stack.probs
    m = stack.n_members
    mean_prob = probs.sum(axis=0) / m
    entropy = binary_entropy(mean_prob)
    variance = ((probs - mean_prob[None, :, :]) ** 2).sum(axis=0) / m
    member_entropy = binary_entropy(probs).sum(axis=0) / m
    mutual_info = entropy - member_entropy
    low = float(mutual_info.min()) if mutual_info.size else 0.0
    if low < -_MI_CLAMP_SLACK:
        raise AssertionError(
            f"mutual information fell below the clamp slack: {low}"
        )
    mutual_info = np.maximum(mutual_info, 0.0)
    return PixelMetrics(
        scene_id=stack.scene_id,
        mean_prob=mean_prob,
        entropy=entropy,
        variance=variance,
        mutual_info=mutual_info,
    )


@dataclass(frozen=True)
class RoiSpec:
    """ROI = pixels with mean probability >= threshold.

    When the ROI comes up empty: ``abstain`` leaves the score absent,
    ``top_quantile`` takes the ceil(q*H*W) highest-mean pixels (row-major
    order breaks ties), ``whole_image`` uses every pixel.
    """

    threshold: float = 0.5
    empty_roi_fallback: str = "top_quantile"
    quantile: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold must be in (0,1), got {self.threshold}")
        if self.empty_roi_fallback not in ("abstain", "top_quantile", "whole_image"):
            raise DataError(
                f"unknown fallback {self.empty_roi_fallback!r}; "
                "expected abstain, top_quantile or whole_image"
            )
        if not 0.0 < self.quantile <= 1.0:
            raise DataError(f"quantile must be in (0,1], got {self.quantile}")


def roi_mask(mean_prob: np.ndarray, spec: RoiSpec = RoiSpec()) -> tuple[np.ndarray, bool]:
    """Binary ROI mask plus a flag marking that the fallback fired."""
    p = np.asarray(mean_prob, dtype=np.float64)
    if p.ndim != 2:
        raise DataError(f"mean_prob must be H x W, got shape {p.shape}")
    mask = p >= spec.threshold
    if mask.any():
        return mask, False
    if spec.empty_roi_fallback == "abstain":
        return np.zeros_like(mask), True
    if spec.empty_roi_fallback == "whole_image":
        return np.ones_like(mask), True
    n_pick = math.ceil(spec.quantile * p.size)
    flat = p.reshape(-1)
    # stable sort on the negated values: equal probabilities keep
    # row-major order, so ties resolve to the earliest pixels
    order = np.argsort(-flat, kind="stable")[:n_pick]
    picked = np.zeros(p.size, dtype=bool)
    picked[order] = True
    return picked.reshape(p.shape), True


@dataclass(frozen=True)
class ImageScore:
    scene_id: str
    metric_name: str
    value: Optional[float]
    roi_size: int
    empty_roi: bool

    def __post_init__(self):
        if self.value is not None and not math.isfinite(self.value):
            raise DataError("image score must be finite when present")
        if self.value is None and self.roi_size != 0:
            raise DataError("absent score implies an empty ROI")


def image_score(
    metrics: PixelMetrics, mask: np.ndarray, metric_name: str, *, empty_roi: bool = False
) -> ImageScore:
    """Mean of one pixel metric over the masked pixels.

    An all-false mask (the abstain fallback) yields an absent value,
    never a zero.
    """
    values = metrics.by_name(metric_name)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise DataError(f"mask shape {mask.shape} != metric shape {values.shape}")
    roi_size = int(mask.sum())
    if roi_size == 0:
        return ImageScore(
            scene_id=metrics.scene_id,
            metric_name=metric_name,
            value=None,
            roi_size=0,
            empty_roi=True,
        )
    return ImageScore(
        scene_id=metrics.scene_id,
        metric_name=metric_name,
        value=float(values[mask].mean()),
        roi_size=roi_size,
        empty_roi=empty_roi,
    )


def score_stack(
    stack: PredictionStack, spec: RoiSpec = RoiSpec()
) -> tuple[PixelMetrics, dict[str, ImageScore]]:
    """All four image scores for one scene under a shared ROI."""
    metrics = pixel_metrics(stack)
    mask, fell_back = roi_mask(metrics.mean_prob, spec)
    return metrics, {
        name: image_score(metrics, mask, name, empty_roi=fell_back)
        for name in METRIC_NAMES
    }
