"""Command-line front end.

One JSON config file drives the pipeline; individual values can be
overridden with repeated ``--set key=value`` flags (values parsed as
JSON, falling back to plain strings). Exit codes: 0 ok, 2 config
error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from dataclasses import fields
from pathlib import Path

import click

from . import ood
from .clustering import save_model
from .config import PipelineConfig, apply_overrides, load_config
from .errors import ConfigError, DataError
from .manifest import load_manifest
from .report import (
    build_report,
    fit_models,
    run_pipeline,
    validate_report,
    write_report_dir,
)
from .server import make_server
from .synth import SynthConfig, synth_generate

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    out: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _pipeline_config(config_path: str | None, set_pairs: tuple[str, ...]) -> PipelineConfig:
    cfg = load_config(config_path) if config_path else PipelineConfig()
    overrides = _parse_overrides(set_pairs)
    return apply_overrides(cfg, overrides) if overrides else cfg


def _synth_config(config_path: str | None, set_pairs: tuple[str, ...]) -> SynthConfig:
    doc: dict = {}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc.update(_parse_overrides(set_pairs))
    known = {f.name for f in fields(SynthConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return SynthConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - boundary
            click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


_config_opt = click.option("--config", "config_path", type=click.Path(), default=None,
                           help="JSON config file.")
_set_opt = click.option("--set", "set_pairs", multiple=True, metavar="KEY=VALUE",
                        help="Override one config value (JSON-parsed).")
_manifest_opt = click.option("--manifest", "manifest_path", type=click.Path(), required=True,
                             help="Dataset manifest JSON.")


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: ("" if v is None else v) for k, v in row.items()}
            )


@click.group()
def main() -> None:
    """Reliability scoring for segmentation predictions."""


@main.command()
@_config_opt
@_set_opt
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_exit_codes
def synth(config_path, set_pairs, out_dir) -> None:
    """Generate a deterministic synthetic dataset."""
    cfg = _synth_config(config_path, set_pairs)
    dataset = synth_generate(cfg, out_dir)
    click.echo(f"wrote {dataset.manifest_path} ({len(dataset.scene_ids)} scenes)")


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_exit_codes
def fit(manifest_path, config_path, set_pairs, out_dir) -> None:
    """Fit the per-space reference centroid models and save them."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for space, model in fit_models(dataset, cfg).items():
        tensor_path, _ = save_model(model, out / f"centroids_{space}")
        click.echo(
            f"{space}: k={model.k} wcss={model.fit_meta['wcss']:.6g} -> {tensor_path}"
        )


@main.command("score-ood")
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output CSV.")
@_exit_codes
def score_ood(manifest_path, config_path, set_pairs, out_path) -> None:
    """Score every scene against the reference centroid models."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    models = fit_models(dataset, cfg)
    params = ood.NcddParams(alpha=cfg.alpha, beta=cfg.beta)
    rows: list[dict] = []
    for space, model in models.items():
        matrix = next(
            dataset.features[name]
            for name, pop in dataset.feature_populations.items()
            if pop == "scenes" and dataset.features[name].space_tag == space
        )
        rows.extend(ood.scores_to_rows(ood.score_population(model, matrix, params)))
    rows.sort(key=lambda r: (r["scene_id"], r["space"]))
    _write_csv(
        Path(out_path),
        ["scene_id", "space", "d_nearest", "normalized_distance", "ncdd", "nearest_index"],
        rows,
    )
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


@main.command("score-uncertainty")
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output CSV.")
@click.option("--workers", type=int, default=1, show_default=True)
@_exit_codes
def score_uncertainty(manifest_path, config_path, set_pairs, out_path, workers) -> None:
    """Image-level uncertainty scores per scene."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    report = build_report(dataset, cfg, workers)
    rows = []
    for scene in report["scenes"]:
        for metric, value in sorted(scene["uncertainty"]["scores"].items()):
            rows.append(
                {
                    "scene_id": scene["scene_id"],
                    "metric": metric,
                    "value": value,
                    "roi_size": scene["uncertainty"]["roi_size"],
                    "empty_roi": scene["uncertainty"]["empty_roi"],
                }
            )
    _write_csv(Path(out_path), ["scene_id", "metric", "value", "roi_size", "empty_roi"], rows)
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output CSV.")
@click.option("--workers", type=int, default=1, show_default=True)
@_exit_codes
def evaluate(manifest_path, config_path, set_pairs, out_path, workers) -> None:
    """Per-scene segmentation metrics against ground truth."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    report = build_report(dataset, cfg, workers)
    rows = [
        {
            "scene_id": scene["scene_id"],
            **{k: scene["metrics"][k] for k in ("iou", "f1", "accuracy", "precision", "recall")},
            "has_truth": scene["metrics"]["has_truth"],
        }
        for scene in report["scenes"]
    ]
    _write_csv(
        Path(out_path),
        ["scene_id", "iou", "f1", "accuracy", "precision", "recall", "has_truth"],
        rows,
    )
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Directory for per-score curve CSVs and the summary table.")
@click.option("--workers", type=int, default=1, show_default=True)
@_exit_codes
def discard(manifest_path, config_path, set_pairs, out_dir, workers) -> None:
    """Risk-coverage curves for every configured score."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    report = build_report(dataset, cfg, workers)
    out = Path(out_dir)
    for curve in report["curves"]:
        safe = curve["score_name"].replace("/", "_")
        _write_csv(
            out / f"curve_{safe}.csv",
            ["coverage", "risk", "nonrejected_f1"],
            curve["points"],
        )
    _write_csv(
        out / "summary.csv",
        ["score_name", "auc_risk_coverage", "risk_coverage_at_half",
         "auc_nonrejected_f1", "nonrejected_f1_at_half"],
        report["summary_table"],
    )
    click.echo(f"wrote {len(report['curves'])} curves under {out}")


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Combiner JSON output path.")
@click.option("--workers", type=int, default=1, show_default=True)
@_exit_codes
def fuse(manifest_path, config_path, set_pairs, out_path, workers) -> None:
    """Train the failure combiner and save it."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    report = build_report(dataset, cfg, workers)
    section = report["combiner"]
    if section is None:
        raise DataError("combiner could not be trained (single-class or unlabeled data)")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(
        json.dumps(section, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(
        f"wrote {out_path} (threshold={section['selected_threshold']:.6g}, "
        f"{len(section['feature_names'])} features)"
    )


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Directory for grouping/trend CSVs.")
@click.option("--workers", type=int, default=1, show_default=True)
@_exit_codes
def link(manifest_path, config_path, set_pairs, out_dir, workers) -> None:
    """Decile groupings and trends of scores against attributes."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    report = build_report(dataset, cfg, workers)
    out = Path(out_dir)
    grouping_rows = []
    for grouping in report["groupings"]:
        for b in grouping["bins"]:
            grouping_rows.append(
                {
                    "attribute": grouping["attribute"],
                    "score_name": grouping["score_name"],
                    "bin": b["index"],
                    "value_lo": b["value_lo"],
                    "value_hi": b["value_hi"],
                    "count": len(b["scene_ids"]),
                    "mean_score": b["mean_score"],
                    "mean_f1": b["mean_f1"],
                }
            )
    _write_csv(
        out / "deciles.csv",
        ["attribute", "score_name", "bin", "value_lo", "value_hi", "count",
         "mean_score", "mean_f1"],
        grouping_rows,
    )
    _write_csv(
        out / "trends.csv",
        ["attribute", "score_name", "pearson_r", "slope", "intercept", "n_bins_used"],
        [
            {k: t[k] for k in ("attribute", "score_name", "pearson_r", "slope",
                               "intercept", "n_bins_used")}
            for t in report["trends"]
        ],
    )
    click.echo(
        f"wrote {out / 'deciles.csv'} and {out / 'trends.csv'} "
        f"({len(report['trends'])} trends)"
    )


@main.command()
@_manifest_opt
@_config_opt
@_set_opt
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Report directory (report.json + heatmaps/).")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--no-heatmaps", is_flag=True, default=False,
              help="Skip PNG rendering.")
@_exit_codes
def report(manifest_path, config_path, set_pairs, out_dir, workers, no_heatmaps) -> None:
    """Run the full pipeline and write the JSON report."""
    cfg = _pipeline_config(config_path, set_pairs)
    dataset = load_manifest(manifest_path)
    doc, heatmaps = run_pipeline(
        dataset, cfg, workers, with_heatmaps=not no_heatmaps
    )
    validate_report(doc)
    path = write_report_dir(doc, out_dir, heatmaps)
    click.echo(f"wrote {path} ({len(doc['scenes'])} scenes)")


@main.command()
@click.option("--report-dir", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Directory of dashboard assets served at /.")
@_exit_codes
def serve(report_dir, host, port, static_dir) -> None:
    """Serve a rendered report directory over HTTP."""
    httpd = make_server(report_dir, host, port, static_dir)
    click.echo(f"serving {report_dir} on http://{host}:{httpd.server_address[1]}/")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        httpd.shutdown()


if __name__ == "__main__":
    main()
