"""Pipeline orchestration and JSON report assembly.

The report is the single artifact the dashboard and downstream tooling
consume. Serialization is deliberately boring: sorted keys, two-space
indent, no timestamps, floats as Python's shortest round-trip repr, so
the same dataset, config and seed produce byte-identical output
regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import attrlink, evaluation, fusion, ood, uncertainty
from .clustering import CentroidModel, fit_reference_model, select_k_elbow
from .config import PipelineConfig
from .datamodel import SPACE_TAGS, PredictionStack, SceneRecord
from .errors import ConfigError, DataError
from .heatmap import DEFAULT_VMAX, render_heatmap_png
from .manifest import Dataset

SCHEMA_VERSION = 1

# score names follow the summary-table convention: plural "embeddings"
SCORE_SUFFIX = {"raw": "raw", "embedding": "embeddings"}


def _plain(obj):
    """Recursively convert to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_to_bytes(report: dict) -> bytes:
    text = json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False)
    return text.encode("utf-8") + b"\n"


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def report_schema() -> dict:
    schema_text = (
        resources.files("segrel").joinpath("schemas/report.schema.json").read_text("utf-8")
    )
    return json.loads(schema_text)


def validate_report(report: dict) -> None:
    """Schema validation plus referential-integrity checks.

    Needs the jsonschema package for the schema half; the integrity
    checks always run.
    """
    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        jsonschema.validate(instance=_plain(report), schema=report_schema())
    scene_ids = {s["scene_id"] for s in report["scenes"]}
    for curve in report["curves"]:
        for sid in curve.get("undefined_f1_scenes", []):
            if sid not in scene_ids:
                raise DataError(f"curve {curve['score_name']}: unknown scene {sid}")
    for grouping in report.get("groupings", []):
        for b in grouping["bins"]:
            for sid in b["scene_ids"]:
                if sid not in scene_ids:
                    raise DataError(
                        f"grouping {grouping['attribute']}/{grouping['score_name']}: "
                        f"unknown scene {sid}"
                    )


def _reference_matrix(dataset: Dataset, space: str):
    hits = [
        name
        for name, pop in dataset.feature_populations.items()
        if pop == "reference" and dataset.features[name].space_tag == space
    ]
    if len(hits) != 1:
        raise DataError(
            f"need exactly one reference feature matrix for space {space!r}, "
            f"found {len(hits)}"
        )
    return dataset.features[hits[0]]


def _scene_matrix(dataset: Dataset, space: str):
    hits = [
        name
        for name, pop in dataset.feature_populations.items()
        if pop == "scenes" and dataset.features[name].space_tag == space
    ]
    if len(hits) != 1:
        raise DataError(
            f"need exactly one scene feature matrix for space {space!r}, "
            f"found {len(hits)}"
        )
    return dataset.features[hits[0]]


def fit_models(dataset: Dataset, cfg: PipelineConfig) -> dict[str, CentroidModel]:
    """One centroid model per space, from the reference populations."""
    models: dict[str, CentroidModel] = {}
    for space in SPACE_TAGS:
        ref = _reference_matrix(dataset, space)
        if cfg.elbow_ks is not None:
            scan = select_k_elbow(
                ref, cfg.elbow_ks, cfg.seed, n_init=cfg.kmeans_n_init
            )
            k = scan.chosen_k
        else:
            k = cfg.k_raw if space == "raw" else cfg.k_embedding
        models[space] = fit_reference_model(
            ref, k, cfg.seed, n_init=cfg.kmeans_n_init
        )
    return models


def model_digest(model: CentroidModel) -> str:
    return hashlib.sha256(
        np.ascontiguousarray(model.centroids, dtype="<f8").tobytes()
    ).hexdigest()


def _scene_pass(stack: PredictionStack, cfg: PipelineConfig) -> dict:
    """All per-scene computation: uncertainty maps/scores, predicted
    mask, confusion and segmentation metrics."""
    spec = uncertainty.RoiSpec(
        threshold=cfg.roi_threshold,
        empty_roi_fallback=cfg.roi_fallback,
        quantile=cfg.roi_quantile,
    )
    metrics_maps, image_scores = uncertainty.score_stack(stack, spec)
    pred_mask = (metrics_maps.mean_prob >= cfg.pred_threshold).astype(np.uint8)
    out: dict = {
        "maps": metrics_maps,
        "image_scores": image_scores,
        "pred_mask": pred_mask,
        "confusion": None,
        "seg": None,
    }
    if stack.mask is not None:
        counts = evaluation.confusion(pred_mask, stack.mask)
        out["confusion"] = counts
        out["seg"] = evaluation.seg_metrics(counts)
    return out


def _map_scenes(dataset: Dataset, cfg: PipelineConfig, workers: int) -> dict[str, dict]:
    stacks = [dataset.stacks[sid] for sid in dataset.scene_ids]
    if workers <= 1:
        results = [_scene_pass(s, cfg) for s in stacks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _scene_pass(s, cfg), stacks))
    return dict(zip(dataset.scene_ids, results))


def _seg_dict(seg) -> dict:
    if seg is None:
        return {
            "iou": None, "f1": None, "accuracy": None,
            "precision": None, "recall": None, "has_truth": False,
        }
    return {
        "iou": seg.iou, "f1": seg.f1, "accuracy": seg.accuracy,
        "precision": seg.precision, "recall": seg.recall, "has_truth": True,
    }


def run_pipeline(
    dataset: Dataset,
    cfg: PipelineConfig,
    workers: int = 1,
    *,
    with_heatmaps: bool = False,
) -> tuple[dict, dict[str, dict[str, bytes]] | None]:
    """Run every stage over a loaded dataset and assemble the report.

    Returns (report, heatmaps) where heatmaps maps scene_id -> metric ->
    PNG bytes when requested.
    """
    models = fit_models(dataset, cfg)
    params = ood.NcddParams(alpha=cfg.alpha, beta=cfg.beta)

    reference_scores: dict[str, list[ood.OodScore]] = {}
    scene_ood: dict[str, dict[str, ood.OodScore]] = {
        sid: {} for sid in dataset.scene_ids
    }
    for space in SPACE_TAGS:
        reference_scores[space] = ood.score_population(
            models[space], _reference_matrix(dataset, space), params
        )
        for s in ood.score_population(models[space], _scene_matrix(dataset, space), params):
            scene_ood[s.scene_id][space] = s

    per_scene = _map_scenes(dataset, cfg, workers)

    records: list[SceneRecord] = []
    heatmaps: dict[str, dict[str, bytes]] | None = {} if with_heatmaps else None
    for sid in dataset.scene_ids:
        result = per_scene[sid]
        rec = SceneRecord(scene_id=sid)
        for space, s in scene_ood[sid].items():
            rec.ood[space] = {
                "d_nearest": s.d_nearest,
                "normalized_distance": s.normalized_distance,
                "ncdd": s.ncdd,
                "nearest_index": s.nearest_index,
                "degenerate": s.degenerate,
            }
            suffix = SCORE_SUFFIX[space]
            rec.scores[f"normalized_distance_{suffix}"] = s.normalized_distance
            rec.scores[f"-ncdd_{suffix}"] = -s.ncdd
            if s.degenerate:
                rec.flags.append(f"degenerate centroid distances ({space})")
        image_scores = result["image_scores"]
        any_score = next(iter(image_scores.values()))
        rec.uncertainty = {
            "roi_size": any_score.roi_size,
            "empty_roi": any_score.empty_roi,
            "scores": {name: s.value for name, s in image_scores.items()},
        }
        if any_score.empty_roi:
            rec.flags.append("empty ROI")
        for name in ("variance", "entropy", "mutual_info"):
            rec.scores[name] = image_scores[name].value
        seg = result["seg"]
        rec.metrics = _seg_dict(seg)
        if seg is not None and seg.f1 is None:
            rec.flags.append("undefined F1")
        if dataset.attributes is not None:
            rec.attributes = {
                col: dataset.attributes.get(sid, col)
                for col in dataset.attributes.columns
            }
        records.append(rec)
        if heatmaps is not None:
            maps = result["maps"]
            heatmaps[sid] = {
                name: render_heatmap_png(maps.by_name(name), DEFAULT_VMAX[name])
                for name in uncertainty.METRIC_NAMES
            }

    combiner_section = _fit_combiner(records, cfg)
    score_names = list(cfg.score_names)
    if combiner_section is not None:
        score_names.append("classifier_score")

    labeled = [r for r in records if r.metrics["has_truth"]]
    curves = []
    summary = []
    if labeled:
        confusions = {r.scene_id: per_scene[r.scene_id]["confusion"] for r in labeled}
        for name in score_names:
            curve = evaluation.discard_curve(
                [r.scene_id for r in labeled],
                [r.scores.get(name) for r in labeled],
                [r.metrics["f1"] for r in labeled],
                score_name=name,
                mode=cfg.discard_mode,
                confusions=[confusions[r.scene_id] for r in labeled]
                if cfg.discard_mode == "micro"
                else None,
            )
            curves.append(_curve_dict(curve))
            summary.append(evaluation.curve_summary(curve))

    calibration = _calibration_section(dataset, per_scene, cfg)
    groupings, trends, skipped = _attribute_section(records, score_names, cfg, dataset)
    density = _density_section(reference_scores, scene_ood, dataset, cfg)

    report = {
        "schema_version": SCHEMA_VERSION,
        "run": {
            "seed": cfg.seed,
            "config_digest": cfg.digest(),
            "config": cfg.to_dict(),
            "dataset": dataset.name,
            "manifest_digest": dataset.manifest_digest,
        },
        "centroid_models": {
            space: {
                "k": models[space].k,
                "space_tag": space,
                "digest": model_digest(models[space]),
                "fit_meta": models[space].fit_meta,
            }
            for space in SPACE_TAGS
        },
        "scenes": [
            {
                "scene_id": r.scene_id,
                "ood": r.ood,
                "uncertainty": r.uncertainty,
                "metrics": r.metrics,
                "attributes": r.attributes,
                "scores": r.scores,
                "flags": r.flags,
            }
            for r in records
        ],
        "curves": curves,
        "summary_table": summary,
        "calibration": calibration,
        "groupings": groupings,
        "trends": trends,
        "groupings_skipped": skipped,
        "combiner": combiner_section,
        "distance_density": density,
    }
    return report, heatmaps


def build_report(dataset: Dataset, cfg: PipelineConfig, workers: int = 1) -> dict:
    report, _ = run_pipeline(dataset, cfg, workers)
    return report


def _curve_dict(curve: evaluation.RiskCoverageCurve) -> dict:
    return {
        "score_name": curve.score_name,
        "points": evaluation.curve_to_rows(curve),
        "aurc": curve.aurc,
        "risk_at_half": curve.risk_at_half,
        "auc_nrf1": curve.auc_nrf1,
        "nrf1_at_half": curve.nrf1_at_half,
        "undefined_f1_scenes": list(curve.undefined_f1_scenes),
    }


def _fit_combiner(records: list[SceneRecord], cfg: PipelineConfig) -> dict | None:
    labeled = [r for r in records if r.metrics["has_truth"]]
    if len(labeled) < 4:
        warnings.warn("too few labeled scenes to train the combiner", stacklevel=2)
        return None
    feature_names = list(cfg.score_names)
    if cfg.include_attribute_features:
        attr_names = sorted({k for r in labeled for k in r.attributes})
        overlap = set(attr_names) & set(feature_names)
        if overlap:
            raise ConfigError(
                f"attribute names collide with score names: {sorted(overlap)}"
            )
        for r in records:
            for name in attr_names:
                r.scores[name] = r.attributes.get(name)
        feature_names.extend(attr_names)

    y = fusion.failure_labels(
        [r.metrics["f1"] for r in labeled], cfg.failure_threshold
    )
    if y.min() == y.max():
        warnings.warn(
            "all scenes on one side of the failure threshold; combiner skipped",
            stacklevel=2,
        )
        return None
    train_idx, eval_idx = fusion.stratified_split(y, cfg.seed, cfg.train_frac)
    train_records = [labeled[i] for i in train_idx]
    spec = fusion.fit_feature_spec(train_records, feature_names)
    X_train = fusion.build_features(train_records, spec)
    model = fusion.train_combiner(
        X_train,
        y[train_idx],
        l2=cfg.fusion_l2,
        seed=cfg.seed,
        max_iter=cfg.fusion_max_iter,
        tol=cfg.fusion_tol,
        feature_spec=spec,
        failure_threshold=cfg.failure_threshold,
    )
    for r, p in zip(records, fusion.score_records(model, records)):
        r.scores["classifier_score"] = float(p)

    eval_y = y[eval_idx]
    threshold_split = eval_idx if (eval_y.size and eval_y.min() != eval_y.max()) else train_idx
    threshold = fusion.select_threshold(
        [labeled[i].scores["classifier_score"] for i in threshold_split],
        y[threshold_split],
        objective="detection_f1",
    )
    return {
        "feature_names": list(model.feature_names),
        "dropped_features": list(spec.dropped),
        "weights": list(model.weights),
        "bias": model.bias,
        "meta": model.meta,
        "train_scene_ids": [labeled[i].scene_id for i in train_idx],
        "eval_scene_ids": [labeled[i].scene_id for i in eval_idx],
        "selected_threshold": threshold,
        "threshold_objective": "detection_f1",
        "failure_counts": {"train": int(y[train_idx].sum()), "eval": int(y[eval_idx].sum())},
    }


def _calibration_section(
    dataset: Dataset, per_scene: dict[str, dict], cfg: PipelineConfig
) -> list[dict]:
    probs = []
    labels = []
    for sid in dataset.scene_ids:
        stack = dataset.stacks[sid]
        if stack.mask is None:
            continue
        probs.append(per_scene[sid]["maps"].mean_prob.reshape(-1))
        labels.append(stack.mask.reshape(-1))
    if not probs:
        return []
    p = np.concatenate(probs)
    y = np.concatenate(labels)
    if p.shape[0] < cfg.calibration_bins:
        return []
    out = []
    for mode in ("ECE", "ACE"):
        result = evaluation.calibration(p, y, mode=mode, m_bins=cfg.calibration_bins)
        out.append(
            {
                "mode": result.mode,
                "m_bins": result.m_bins,
                "error": result.error,
                "bins": [
                    {"count": b.count, "conf": b.conf, "acc": b.acc}
                    for b in result.bins
                ],
            }
        )
    return out


def _attribute_section(
    records: list[SceneRecord],
    score_names: list[str],
    cfg: PipelineConfig,
    dataset: Dataset,
) -> tuple[list[dict], list[dict], list[dict]]:
    groupings: list[dict] = []
    trends: list[dict] = []
    skipped: list[dict] = []
    if dataset.attributes is None:
        return groupings, trends, skipped
    columns = cfg.attributes if cfg.attributes is not None else dataset.attributes.columns
    for attribute in columns:
        for score_name in score_names:
            usable = sum(
                1 for r in records if r.attributes.get(attribute) is not None
            )
            if usable < 10:
                skipped.append(
                    {
                        "attribute": attribute,
                        "score_name": score_name,
                        "reason": f"only {usable} scenes with this attribute",
                    }
                )
                continue
            grouping = attrlink.decile_group(records, attribute, score_name)
            groupings.append(
                {
                    "attribute": grouping.attribute,
                    "score_name": grouping.score_name,
                    "excluded_missing": grouping.excluded_missing,
                    "bins": [
                        {
                            "index": b.index,
                            "value_lo": b.value_lo,
                            "value_hi": b.value_hi,
                            "scene_ids": list(b.scene_ids),
                            "mean_score": b.mean_score,
                            "mean_f1": b.mean_f1,
                        }
                        for b in grouping.bins
                    ],
                }
            )
            defined = sum(
                1
                for b in grouping.bins
                if b.mean_score is not None and b.mean_f1 is not None
            )
            if defined < 3:
                skipped.append(
                    {
                        "attribute": attribute,
                        "score_name": score_name,
                        "reason": f"only {defined} bins with defined means",
                    }
                )
                continue
            trend = attrlink.group_trend(grouping)
            trends.append(
                {
                    "attribute": trend.attribute,
                    "score_name": trend.score_name,
                    "pearson_r": trend.pearson_r,
                    "slope": trend.slope,
                    "intercept": trend.intercept,
                    "n_bins_used": trend.n_bins_used,
                    "flags": list(trend.flags),
                }
            )
    return groupings, trends, skipped


def _density_section(
    reference_scores: dict[str, list[ood.OodScore]],
    scene_ood: dict[str, dict[str, ood.OodScore]],
    dataset: Dataset,
    cfg: PipelineConfig,
) -> dict:
    out: dict = {}
    for space in SPACE_TAGS:
        downstream = [scene_ood[sid][space] for sid in dataset.scene_ids]
        if not reference_scores[space] or not downstream:
            continue
        ref_density, down_density = ood.density_summary(
            reference_scores[space], downstream, bins=cfg.density_bins
        )
        out[space] = {
            "bin_edges": list(ref_density.bin_edges),
            "reference_counts": list(ref_density.counts),
            "downstream_counts": list(down_density.counts),
        }
    return out


def write_report_dir(
    report: dict,
    out_dir: str | Path,
    heatmaps: dict[str, dict[str, bytes]] | None = None,
) -> Path:
    """Persist report.json (stable bytes) and optional per-scene PNGs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_bytes(report_to_bytes(report))
    if heatmaps:
        for sid, metric_pngs in heatmaps.items():
            scene_dir = out / "heatmaps" / sid
            scene_dir.mkdir(parents=True, exist_ok=True)
            for metric, png in metric_pngs.items():
                (scene_dir / f"{metric}.png").write_bytes(png)
    return report_path
