"""Reliability scoring for segmentation predictions: out-of-distribution
detection against reference centroids, ensemble uncertainty, selective
prediction analysis, flag fusion, and attribute diagnostics."""

from .clustering import (
    CentroidModel,
    ElbowScan,
    KMeans,
    assign,
    choose_elbow,
    fit_reference_model,
    load_model,
    save_model,
    select_k_elbow,
)
from .config import PipelineConfig, load_config
from .datamodel import (
    AttributeTable,
    FeatureMatrix,
    PredictionStack,
    SceneRecord,
    reduce_bands,
)
from .errors import (
    ChecksumError,
    ConfigError,
    DataError,
    ManifestError,
    SegrelError,
    TensorFormatError,
)
from .evaluation import (
    CalibrationResult,
    ConfusionCounts,
    RiskCoverageCurve,
    SegMetrics,
    calibration,
    confusion,
    discard_curve,
    flag_at_threshold,
    seg_metrics,
)
from .fusion import (
    Combiner,
    FeatureSpec,
    LogisticCombiner,
    build_features,
    combiner_score,
    failure_labels,
    fit_feature_spec,
    select_threshold,
    stratified_split,
    train_combiner,
)
from .manifest import Dataset, load_manifest, write_manifest
from .ood import NcddParams, OodScore, centroid_distances, density_summary, ncdd, score_population
from .attrlink import DecileGrouping, GroupTrend, decile_group, group_trend
from .heatmap import DEFAULT_VMAX, render_heatmap_png
from .report import build_report, run_pipeline, validate_report, write_report_dir
from .synth import SynthConfig, synth_generate
from .tensorfile import read_tensor, write_tensor
from .uncertainty import (
    ImageScore,
    PixelMetrics,
    RoiSpec,
    image_score,
    pixel_metrics,
    roi_mask,
    score_stack,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeTable",
    "CalibrationResult",
    "CentroidModel",
    "ChecksumError",
    "Combiner",
    "ConfigError",
    "ConfusionCounts",
    "DataError",
    "Dataset",
    "DecileGrouping",
    "DEFAULT_VMAX",
    "ElbowScan",
    "FeatureMatrix",
    "FeatureSpec",
    "GroupTrend",
    "ImageScore",
    "KMeans",
    "LogisticCombiner",
    "ManifestError",
    "NcddParams",
    "OodScore",
    "PipelineConfig",
    "PixelMetrics",
    "PredictionStack",
    "RiskCoverageCurve",
    "RoiSpec",
    "SceneRecord",
    "SegMetrics",
    "SegrelError",
    "SynthConfig",
    "TensorFormatError",
    "assign",
    "build_features",
    "build_report",
    "calibration",
    "centroid_distances",
    "choose_elbow",
    "combiner_score",
    "confusion",
    "decile_group",
    "density_summary",
    "discard_curve",
    "failure_labels",
    "fit_feature_spec",
    "fit_reference_model",
    "flag_at_threshold",
    "group_trend",
    "image_score",
    "load_config",
    "load_manifest",
    "load_model",
    "ncdd",
    "pixel_metrics",
    "read_tensor",
    "reduce_bands",
    "render_heatmap_png",
    "roi_mask",
    "run_pipeline",
    "save_model",
    "score_population",
    "score_stack",
    "seg_metrics",
    "select_k_elbow",
    "select_threshold",
    "stratified_split",
    "synth_generate",
    "train_combiner",
    "validate_report",
    "write_manifest",
    "write_report_dir",
    "write_tensor",
]
