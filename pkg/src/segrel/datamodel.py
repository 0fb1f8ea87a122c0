"""Core in-memory types: feature matrices, prediction stacks, attribute
tables and the per-scene record that downstream stages fill in.

All containers are frozen after construction; workers can share them
freely. The on-disk side lives in tensorfile.py / manifest.py.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._validation import check_binary, check_probabilities
from .errors import DataError, NonFiniteValuesError

SPACE_TAGS = ("raw", "embedding")


@dataclass(frozen=True)
class FeatureMatrix:
    """N samples x D features, with one opaque string id per row."""

    sample_ids: tuple[str, ...]
    values: np.ndarray
    space_tag: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"feature values must be 2-d, got shape {values.shape}")
        if values.shape[1] < 1:
            raise DataError("feature dimension D must be >= 1")
        if values.shape[0] != len(self.sample_ids):
            raise DataError(
                f"{len(self.sample_ids)} ids but {values.shape[0]} feature rows"
            )
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise DataError("sample_ids must be unique")
        if values.size and not np.isfinite(values).all():
            raise NonFiniteValuesError("feature values must be finite")
        if self.space_tag not in SPACE_TAGS:
            raise DataError(f"space_tag must be one of {SPACE_TAGS}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def canonical_order(self) -> "FeatureMatrix":
        """Rows reordered by sorted sample_ids (the seeding order for fits)."""
        order = np.argsort(np.array(self.sample_ids))
        return FeatureMatrix(
            tuple(self.sample_ids[i] for i in order),
            self.values[order],
            self.space_tag,
        )


@dataclass(frozen=True)
class PredictionStack:
    """M ensemble probability maps for one scene, plus optional truth mask."""

    scene_id: str
    probs: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[0] < 1:
            raise DataError(
                f"probs must be M x H x W with M >= 1, got shape {probs.shape}"
            )
        check_probabilities(probs, "ensemble probs")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if self.mask is not None:
            mask = check_binary(self.mask, "ground-truth mask")
            if mask.shape != probs.shape[1:]:
                raise DataError(
                    f"mask shape {mask.shape} != image shape {probs.shape[1:]}"
                )
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)

    @property
    def n_members(self) -> int:
        return self.probs.shape[0]

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.probs.shape[1], self.probs.shape[2]


@dataclass
class SceneRecord:
    """Per-scene ledger filled in by the pipeline stages.

    Scores are keyed by name ("variance", "-ncdd_embeddings", ...); missing
    entries simply have not been computed. ``flags`` collects warnings such
    as undefined F1 or empty ROI.
    """

    scene_id: str
    ood: dict = field(default_factory=dict)
    uncertainty: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    attributes: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)


class AttributeTable:
    """Per-scene real-valued attributes, missing values kept explicit.

    CSV layout: header ``scene_id,<attr1>,<attr2>,...``; empty field means
    missing. Values are stored as float or None, never silently zero.
    """

    def __init__(self, columns: list[str], rows: dict[str, dict]):
        if any(not c for c in columns):
            raise DataError("attribute column names must be nonempty")
        if len(set(columns)) != len(columns):
            raise DataError("attribute column names must be unique")
        self.columns = list(columns)
        self.rows = {sid: dict(vals) for sid, vals in rows.items()}

    def __len__(self) -> int:
        return len(self.rows)

    def scene_ids(self) -> list[str]:
        return list(self.rows)

    def get(self, scene_id: str, column: str):
        """Attribute value, or None when missing or the scene has no row."""
        row = self.rows.get(scene_id)
        if row is None:
            return None
        return row.get(column)

    @classmethod
    def from_csv(cls, path: str | Path) -> "AttributeTable":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_csv_text(text)

    @classmethod
    def from_csv_text(cls, text: str) -> "AttributeTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("attribute CSV is empty") from None
        if not header or header[0] != "scene_id":
            raise DataError("attribute CSV must start with a scene_id column")
        columns = header[1:]
        rows: dict[str, dict] = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"attribute CSV line {lineno}: wrong field count")
            sid = rec[0]
            if sid in rows:
                raise DataError(f"attribute CSV: duplicate scene_id {sid!r}")
            vals = {}
            for col, raw in zip(columns, rec[1:]):
                if raw == "":
                    vals[col] = None
                else:
                    try:
                        vals[col] = float(raw)
                    except ValueError:
                        raise DataError(
                            f"attribute CSV line {lineno}: non-numeric {raw!r}"
                        ) from None
            rows[sid] = vals
        return cls(columns, rows)

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["scene_id"] + self.columns)
        for sid in self.rows:
            row = self.rows[sid]
            writer.writerow(
                [sid]
                + [
                    "" if row.get(c) is None else repr(float(row[c]))
                    for c in self.columns
                ]
            )
        return out.getvalue()

    def to_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


def reduce_bands(chip: np.ndarray) -> np.ndarray:
    """Collapse a B x H x W chip to a 2B feature vector.

    Layout: per-band means first, then per-band population standard
    deviations (denominator H*W).
    """
    chip = np.asarray(chip, dtype=np.float64)
    if chip.ndim != 3 or chip.shape[0] < 1:
        raise DataError(f"chip must be B x H x W with B >= 1, got {chip.shape}")
    if not np.isfinite(chip).all():
        raise NonFiniteValuesError("chip contains non-finite pixels")
    means = chip.mean(axis=(1, 2))
    stds = chip.std(axis=(1, 2))  # population: ddof=0
    return np.concatenate([means, stds])
