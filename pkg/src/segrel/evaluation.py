"""Segmentation metrics, probability calibration, and discard curves.

Zero-denominator metrics are reported as absent (None), never silently
coerced to 0 or 1: a scene with no positive pixels in either prediction
or truth is degenerate and downstream consumers must see that.

Discard curves rank scenes by a reliability score (higher means discard
first; absent scores rank most-uncertain) and sweep retention from all
scenes down to one. Risk is 1 - F1, macro-averaged over retained scenes
by default, with a pooled-confusion micro mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ._validation import check_binary, check_probabilities
from .errors import DataError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )


def confusion(pred_mask: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    pred = check_binary(pred_mask, "pred_mask").astype(bool)
    true = check_binary(truth, "truth").astype(bool)
    if pred.shape != true.shape:
        raise DataError(f"shape mismatch: pred {pred.shape} vs truth {true.shape}")
    return ConfusionCounts(
        tp=int((pred & true).sum()),
        fp=int((pred & ~true).sum()),
        tn=int((~pred & ~true).sum()),
        fn=int((~pred & true).sum()),
    )


@dataclass(frozen=True)
class SegMetrics:
    """Each field is None when its denominator is zero."""

    iou: Optional[float]
    f1: Optional[float]
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]

    @property
    def undefined(self) -> tuple[str, ...]:
        return tuple(
            name
            for name in ("iou", "f1", "accuracy", "precision", "recall")
            if getattr(self, name) is None
        )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def seg_metrics(c: ConfusionCounts) -> SegMetrics:
    return SegMetrics(
        iou=_ratio(c.tp, c.tp + c.fp + c.fn),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        accuracy=_ratio(c.tp + c.tn, c.total),
        precision=_ratio(c.tp, c.tp + c.fp),
        recall=_ratio(c.tp, c.tp + c.fn),
    )


class CalibrationBin(NamedTuple):
    count: int
    conf: Optional[float]
    acc: Optional[float]


@dataclass(frozen=True)
class CalibrationResult:
    mode: str
    m_bins: int
    bins: tuple[CalibrationBin, ...]
    error: float

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise DataError(f"calibration error must be in [0,1], got {self.error}")


def calibration(
    probs: Sequence[float],
    labels: Sequence[int],
    mode: str = "ECE",
    m_bins: int = 15,
) -> CalibrationResult:
    """Expected (equal-width) or adaptive (equal-mass) calibration error.

    ECE assigns probability p to bin floor(p*M), capped at M-1 so the
    last bin is right-inclusive; empty bins contribute zero. ACE sorts
    stably by probability and splits into M contiguous groups differing
    in size by at most one, larger groups first.
    """
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = check_binary(np.asarray(labels).reshape(-1), "labels").astype(np.float64)
    check_probabilities(p, "probs")
    if p.shape[0] != y.shape[0]:
        raise DataError(f"length mismatch: {p.shape[0]} probs vs {y.shape[0]} labels")
    n = p.shape[0]
    if mode not in ("ECE", "ACE"):
        raise DataError(f"mode must be ECE or ACE, got {mode!r}")
    if m_bins < 1:
        raise DataError(f"m_bins must be >= 1, got {m_bins}")
    if n < m_bins:
        raise DataError(f"need n >= M, got n={n}, M={m_bins}")

    if mode == "ECE":
        idx = np.minimum((p * m_bins).astype(np.int64), m_bins - 1)
        order = np.argsort(idx, kind="stable")
        sizes = np.bincount(idx, minlength=m_bins)
    else:
        order = np.argsort(p, kind="stable")
        base, remainder = divmod(n, m_bins)
        sizes = np.full(m_bins, base, dtype=np.int64)
        sizes[:remainder] += 1

    # per-bin sums via one pass over the sorted arrays; reduceat needs the
    # start offsets of the nonempty bins only (empty ECE bins would repeat
    # an offset and corrupt the segment sums)
    starts = np.zeros(m_bins, dtype=np.int64)
    np.cumsum(sizes[:-1], out=starts[1:])
    nonempty = sizes > 0
    p_sums = np.add.reduceat(p[order], starts[nonempty])
    y_sums = np.add.reduceat(y[order], starts[nonempty])
    conf = p_sums / sizes[nonempty]
    acc = y_sums / sizes[nonempty]
    error = float(np.sum(sizes[nonempty] / n * np.abs(acc - conf)))

    counts = sizes.tolist()
    if nonempty.all():
        bins = tuple(map(CalibrationBin, counts, conf.tolist(), acc.tolist()))
    else:
        filled = iter(zip(conf.tolist(), acc.tolist()))
        assembled: list[CalibrationBin] = []
        for count in counts:
            if count:
                c, a = next(filled)
                assembled.append(CalibrationBin(count, c, a))
            else:
                assembled.append(CalibrationBin(0, None, None))
        bins = tuple(assembled)
    return CalibrationResult(mode=mode, m_bins=m_bins, bins=bins, error=error)


@dataclass(frozen=True)
class CurvePoint:
    coverage: float
    risk: float
    nonrejected_f1: float


@dataclass(frozen=True)
class RiskCoverageCurve:
    score_name: str
    points: tuple[CurvePoint, ...]  # ascending coverage, one per retained-count
    aurc: float
    risk_at_half: float
    auc_nrf1: float
    nrf1_at_half: float
    undefined_f1_scenes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        covs = [pt.coverage for pt in self.points]
        if any(b <= a for a, b in zip(covs, covs[1:])):
            raise DataError("coverages must be strictly increasing")


def _discard_order(
    scene_ids: Sequence[str], scores: Sequence[Optional[float]]
) -> list[int]:
    """Indices in discard order: highest score first, absent scores ahead
    of everything, ties broken by ascending scene_id."""

    def key(i: int):
        s = scores[i]
        missing = s is None
        return (0 if missing else 1, 0.0 if missing else -s, scene_ids[i])

    return sorted(range(len(scene_ids)), key=key)


def discard_curve(
    scene_ids: Sequence[str],
    scores: Sequence[Optional[float]],
    per_scene_f1: Sequence[Optional[float]],
    *,
    score_name: str = "score",
    mode: str = "macro",
    confusions: Optional[Sequence[ConfusionCounts]] = None,
) -> RiskCoverageCurve:
    n = len(scene_ids)
    if n == 0:
        raise DataError("discard_curve needs at least one scene")
    if len(scores) != n or len(per_scene_f1) != n:
        raise DataError("scene_ids, scores and per_scene_f1 must align")
    if mode not in ("macro", "micro"):
        raise DataError(f"mode must be macro or micro, got {mode!r}")
    if mode == "micro" and (confusions is None or len(confusions) != n):
        raise DataError("micro mode needs one ConfusionCounts per scene")
    for s in scores:
        if s is not None and not math.isfinite(s):
            raise DataError("scores must be finite or absent")

    order = _discard_order(scene_ids, scores)
    undefined = tuple(
        sorted(scene_ids[i] for i in range(n) if per_scene_f1[i] is None)
    )
    # undefined per-scene F1 contributes risk 0 (macro), flagged above
    effective_f1 = [1.0 if f is None else float(f) for f in per_scene_f1]

    points: list[CurvePoint] = []
    for n_discard in range(n - 1, -1, -1):
        retained = order[n_discard:]
        m = len(retained)
        coverage = m / n
        if mode == "macro":
            nrf1 = sum(effective_f1[i] for i in retained) / m
        else:
            pooled = ConfusionCounts(0, 0, 0, 0)
            for i in retained:
                pooled = pooled + confusions[i]
            pooled_f1 = seg_metrics(pooled).f1
            nrf1 = 1.0 if pooled_f1 is None else pooled_f1
        points.append(CurvePoint(coverage=coverage, risk=1.0 - nrf1, nonrejected_f1=nrf1))

    covs = np.array([pt.coverage for pt in points])
    risks = np.array([pt.risk for pt in points])
    nrf1s = np.array([pt.nonrejected_f1 for pt in points])
    if n == 1:
        aurc = float(risks[0])
        auc_nrf1 = float(nrf1s[0])
    else:
        span = 1.0 - 1.0 / n
        aurc = float(np.trapezoid(risks, covs) / span)
        auc_nrf1 = float(np.trapezoid(nrf1s, covs) / span)

    at_half = int(np.flatnonzero(covs >= 0.5)[0])
    return RiskCoverageCurve(
        score_name=score_name,
        points=tuple(points),
        aurc=aurc,
        risk_at_half=float(risks[at_half]),
        auc_nrf1=auc_nrf1,
        nrf1_at_half=float(nrf1s[at_half]),
        undefined_f1_scenes=undefined,
    )


def flag_at_threshold(
    scores: Sequence[Optional[float]], threshold: float
) -> np.ndarray:
    """Boolean discard flags: discard iff score > threshold (strict).

    Absent scores are treated as maximally uncertain and discarded.
    """
    if not math.isfinite(threshold):
        # +/- inf still compare correctly; reject NaN only
        if math.isnan(threshold):
            raise DataError("threshold must not be NaN")
    out = np.empty(len(scores), dtype=bool)
    for i, s in enumerate(scores):
        out[i] = True if s is None else s > threshold
    return out


def curve_summary(curve: RiskCoverageCurve) -> dict:
    """Table-shaped row: the four headline metrics for one score."""
    return {
        "score_name": curve.score_name,
        "auc_risk_coverage": curve.aurc,
        "risk_coverage_at_half": curve.risk_at_half,
        "auc_nonrejected_f1": curve.auc_nrf1,
        "nonrejected_f1_at_half": curve.nrf1_at_half,
    }


def curve_to_rows(curve: RiskCoverageCurve) -> list[dict]:
    return [
        {
            "coverage": pt.coverage,
            "risk": pt.risk,
            "nonrejected_f1": pt.nonrejected_f1,
        }
        for pt in curve.points
    ]
