"""Pipeline configuration: one JSON document, flag overrides, and a
stable digest embedded in every report so runs are traceable to their
exact settings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

DEFAULT_SCORE_NAMES = (
    "variance",
    "entropy",
    "mutual_info",
    "normalized_distance_raw",
    "normalized_distance_embeddings",
    "-ncdd_raw",
    "-ncdd_embeddings",
)


@dataclass
class PipelineConfig:
    seed: int = 0
    k_raw: int = 15
    k_embedding: int = 15
    elbow_ks: Optional[list[int]] = None  # when set, overrides fixed k per space
    kmeans_n_init: int = 10
    alpha: float = 1.0
    beta: Optional[float] = None  # None -> k - 1
    roi_threshold: float = 0.5
    roi_fallback: str = "top_quantile"
    roi_quantile: float = 0.01
    pred_threshold: float = 0.5
    calibration_bins: int = 15
    failure_threshold: float = 0.5
    fusion_l2: float = 1e-3
    fusion_max_iter: int = 5000
    fusion_tol: float = 1e-6
    train_frac: float = 0.7
    include_attribute_features: bool = False
    density_bins: int = 30
    discard_mode: str = "macro"
    score_names: list[str] = field(default_factory=lambda: list(DEFAULT_SCORE_NAMES))
    attributes: Optional[list[str]] = None  # None -> every attribute column

    def __post_init__(self):
        if self.discard_mode not in ("macro", "micro"):
            raise ConfigError(f"discard_mode must be macro or micro, got {self.discard_mode!r}")
        if not 0.0 < self.pred_threshold < 1.0:
            raise ConfigError("pred_threshold must be in (0,1)")
        if self.elbow_ks is not None and len(self.elbow_ks) < 3:
            raise ConfigError("elbow_ks needs at least 3 candidates")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return PipelineConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """New config with the given field values replaced."""
    doc = cfg.to_dict()
    unknown = sorted(set(overrides) - set(doc))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    doc.update(overrides)
    return config_from_dict(doc)
