"""Linking reliability scores to per-scene environmental attributes.

Scenes are ranked by one attribute and split into near-equal rank bins
(deciles by default; ties broken by scene_id so membership is
deterministic). Each bin reports its mean score and mean F1; a linear
fit over the bin means summarizes the trend. Rank bins, not value bins:
heavy-tailed attributes would otherwise collapse into one bucket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datamodel import SceneRecord
from .errors import DataError


@dataclass(frozen=True)
class DecileBin:
    index: int
    value_lo: float
    value_hi: float
    scene_ids: tuple[str, ...]
    mean_score: Optional[float]
    mean_f1: Optional[float]


@dataclass(frozen=True)
class DecileGrouping:
    attribute: str
    score_name: str
    bins: tuple[DecileBin, ...]
    excluded_missing: int  # scenes without this attribute

    @property
    def usable_count(self) -> int:
        return sum(len(b.scene_ids) for b in self.bins)


def decile_group(
    records: Sequence[SceneRecord],
    attribute: str,
    score_name: str,
    n_bins: int = 10,
) -> DecileGrouping:
    """Rank scenes by an attribute into n near-equal bins (larger bins
    first) and compute per-bin mean score and mean F1.

    Scenes missing the attribute are excluded and counted; scenes missing
    the score or F1 stay in their bin but drop out of that mean.
    """
    if n_bins < 1:
        raise DataError(f"n_bins must be >= 1, got {n_bins}")
    usable = [
        rec for rec in records if rec.attributes.get(attribute) is not None
    ]
    excluded = len(records) - len(usable)
    if len(usable) < n_bins:
        raise DataError(
            f"need >= {n_bins} scenes with attribute {attribute!r}, "
            f"got {len(usable)}"
        )
    usable.sort(key=lambda r: (float(r.attributes[attribute]), r.scene_id))

    base, remainder = divmod(len(usable), n_bins)
    bins: list[DecileBin] = []
    start = 0
    for b in range(n_bins):
        size = base + (1 if b < remainder else 0)
        members = usable[start : start + size]
        start += size
        scores = [
            float(m.scores[score_name])
            for m in members
            if m.scores.get(score_name) is not None
        ]
        f1s = [
            float(m.metrics["f1"])
            for m in members
            if m.metrics.get("f1") is not None
        ]
        bins.append(
            DecileBin(
                index=b,
                value_lo=float(members[0].attributes[attribute]),
                value_hi=float(members[-1].attributes[attribute]),
                scene_ids=tuple(m.scene_id for m in members),
                mean_score=sum(scores) / len(scores) if scores else None,
                mean_f1=sum(f1s) / len(f1s) if f1s else None,
            )
        )
    return DecileGrouping(
        attribute=attribute,
        score_name=score_name,
        bins=tuple(bins),
        excluded_missing=excluded,
    )


@dataclass(frozen=True)
class GroupTrend:
    attribute: str
    score_name: str
    pearson_r: Optional[float]
    slope: Optional[float]
    intercept: Optional[float]
    n_bins_used: int
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.pearson_r is not None and not -1.0 <= self.pearson_r <= 1.0 + 1e-12:
            raise DataError(f"pearson r out of range: {self.pearson_r}")


def pearson_r(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Sample correlation; None when either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return None
    return float(min(1.0, max(-1.0, (dx @ dy) / denom)))


def group_trend(grouping: DecileGrouping) -> GroupTrend:
    """Pearson r and OLS line over the (mean_score, mean_f1) bin pairs."""
    pairs = [
        (b.mean_score, b.mean_f1)
        for b in grouping.bins
        if b.mean_score is not None and b.mean_f1 is not None
    ]
    if len(pairs) < 3:
        raise DataError(
            f"trend needs >= 3 bins with defined means, got {len(pairs)}"
        )
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    flags: list[str] = []
    r = pearson_r(x, y)
    if r is None:
        flags.append("zero-variance bin means; correlation undefined")
    var_x = float(((x - x.mean()) ** 2).sum())
    if var_x == 0.0:
        slope = None
        intercept = None
        if "zero-variance bin means; correlation undefined" not in flags:
            flags.append("zero-variance bin means; correlation undefined")
    else:
        slope = float(((x - x.mean()) @ (y - y.mean())) / var_x)
        intercept = float(y.mean() - slope * x.mean())
    return GroupTrend(
        attribute=grouping.attribute,
        score_name=grouping.score_name,
        pearson_r=r,
        slope=slope,
        intercept=intercept,
        n_bins_used=len(pairs),
        flags=tuple(flags),
    )


def grouping_rows(grouping: DecileGrouping) -> list[dict]:
    """Flat rows for CSV / report embedding."""
    return [
        {
            "attribute": grouping.attribute,
            "score_name": grouping.score_name,
            "bin": b.index,
            "value_lo": b.value_lo,
            "value_hi": b.value_hi,
            "count": len(b.scene_ids),
            "mean_score": b.mean_score,
            "mean_f1": b.mean_f1,
        }
        for b in grouping.bins
    ]
