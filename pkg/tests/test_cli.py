"""Command-line workflows, driven through click's test runner.

The module generates one dataset via the CLI itself; the commands are
then exercised against it end to end, including exit-code mapping.
"""

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from segrel.cli import main

SET_ARGS = [
    "--set", "seed=7",
    "--set", "n_components=5",
    "--set", "n_features_raw=4",
    "--set", "n_features_embedding=6",
    "--set", "n_reference=150",
    "--set", "n_scenes=30",
    "--set", "image_height=16",
    "--set", "image_width=16",
    "--set", "ensemble_size=6",
]

PIPELINE_CONFIG = {
    "seed": 7,
    "k_raw": 5,
    "k_embedding": 5,
    "kmeans_n_init": 4,
    "calibration_bins": 10,
    "density_bins": 12,
}


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(runner, tmp_path_factory):
    """Dataset generated by the CLI plus a pipeline config file."""
    root = tmp_path_factory.mktemp("cli")
    result = runner.invoke(main, ["synth", *SET_ARGS, "--out", str(root / "data")])
    assert result.exit_code == 0, result.output
    config_path = root / "pipeline.json"
    config_path.write_text(json.dumps(PIPELINE_CONFIG))
    return root


@pytest.fixture(scope="module")
def manifest_arg(workdir):
    return ["--manifest", str(workdir / "data" / "manifest.json"), "--config",
            str(workdir / "pipeline.json")]


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestSynth:
    def test_reports_scene_count(self, workdir):
        assert (workdir / "data" / "manifest.json").exists()

    def test_matches_api_generation(self, workdir, small_dataset):
        # the --set overrides must reach the generator verbatim
        cli_manifest = (workdir / "data" / "manifest.json").read_bytes()
        api_manifest = Path(small_dataset.manifest_path).read_bytes()
        assert cli_manifest == api_manifest

    def test_unknown_key_is_config_error(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--set", "n_scnes=3",
                                      "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "unknown config keys" in result.output

    def test_malformed_override_is_config_error(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--set", "n_scenes",
                                      "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "key=value" in result.output

    def test_invalid_value_is_config_error(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--set", "sigma=-1",
                                      "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_unwritable_output_is_internal_error(self, runner, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("plain file")
        result = runner.invoke(main, ["synth", "--set", "n_scenes=1",
                                      "--out", str(blocker / "sub")])
        assert result.exit_code == 4
        assert "internal error" in result.output


class TestFit:
    def test_writes_model_per_space(self, runner, workdir, manifest_arg):
        out = workdir / "models"
        result = runner.invoke(main, ["fit", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "raw: k=5" in result.output
        assert "embedding: k=5" in result.output
        saved = sorted(p.name for p in out.iterdir())
        assert any(name.startswith("centroids_raw") for name in saved)
        assert any(name.startswith("centroids_embedding") for name in saved)

    def test_missing_manifest_is_data_error(self, runner, tmp_path):
        result = runner.invoke(main, ["fit", "--manifest", str(tmp_path / "no.json"),
                                      "--out", str(tmp_path / "m")])
        assert result.exit_code == 3
        assert "data error" in result.output


class TestScoringCommands:
    def test_score_ood_csv(self, runner, workdir, manifest_arg):
        out = workdir / "ood.csv"
        result = runner.invoke(main, ["score-ood", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = read_csv(out)
        assert len(rows) == 60  # 30 scenes x 2 spaces
        assert list(rows[0]) == ["scene_id", "space", "d_nearest",
                                 "normalized_distance", "ncdd", "nearest_index"]
        assert {r["space"] for r in rows} == {"raw", "embedding"}
        for row in rows:
            assert 0.0 < float(row["normalized_distance"]) <= 1.0
        ids = [(r["scene_id"], r["space"]) for r in rows]
        assert ids == sorted(ids)

    def test_score_uncertainty_csv(self, runner, workdir, manifest_arg):
        out = workdir / "unc.csv"
        result = runner.invoke(main, ["score-uncertainty", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = read_csv(out)
        assert len(rows) == 120  # 30 scenes x 4 metrics
        assert {r["metric"] for r in rows} == {"mean_prob", "entropy", "variance", "mutual_info"}
        assert all(r["empty_roi"] == "False" for r in rows)

    def test_evaluate_csv(self, runner, workdir, manifest_arg):
        out = workdir / "eval.csv"
        result = runner.invoke(main, ["evaluate", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = read_csv(out)
        assert len(rows) == 30
        for row in rows:
            assert 0.0 <= float(row["f1"]) <= 1.0
            assert row["has_truth"] == "True"


class TestAnalysisCommands:
    def test_discard_writes_curves_and_summary(self, runner, workdir, manifest_arg):
        out = workdir / "curves"
        result = runner.invoke(main, ["discard", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        curve_files = sorted(p.name for p in out.glob("curve_*.csv"))
        assert len(curve_files) == 8
        assert "curve_variance.csv" in curve_files
        assert "curve_classifier_score.csv" in curve_files
        summary = read_csv(out / "summary.csv")
        assert len(summary) == 8
        points = read_csv(out / "curve_variance.csv")
        assert len(points) == 30
        assert float(points[-1]["coverage"]) == 1.0

    def test_fuse_writes_combiner_json(self, runner, workdir, manifest_arg):
        out = workdir / "combiner.json"
        result = runner.invoke(main, ["fuse", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert len(doc["feature_names"]) == len(doc["weights"]) == 7
        assert isinstance(doc["selected_threshold"], float)

    @pytest.mark.filterwarnings("ignore:all scenes on one side")
    def test_fuse_without_trainable_combiner_is_data_error(self, runner, tmp_path):
        synth = CliRunner().invoke(
            main,
            ["synth", *SET_ARGS, "--set", "n_scenes=12", "--set", "empty_truth_frac=1.0",
             "--out", str(tmp_path / "d")],
        )
        assert synth.exit_code == 0
        result = runner.invoke(
            main,
            ["fuse", "--manifest", str(tmp_path / "d" / "manifest.json"),
             "--set", "k_raw=5", "--set", "k_embedding=5", "--set", "kmeans_n_init=4",
             "--out", str(tmp_path / "c.json")],
        )
        assert result.exit_code == 3
        assert "combiner could not be trained" in result.output

    def test_link_writes_deciles_and_trends(self, runner, workdir, manifest_arg):
        out = workdir / "linked"
        result = runner.invoke(main, ["link", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        deciles = read_csv(out / "deciles.csv")
        trends = read_csv(out / "trends.csv")
        assert len(trends) == 24  # 3 attributes x 8 scores
        assert len(deciles) == 240  # ten bins each
        assert {d["attribute"] for d in deciles} == {"elevation", "river_area", "pasture"}


class TestReportCommand:
    def test_writes_validated_report_with_heatmaps(self, runner, workdir, manifest_arg):
        out = workdir / "report"
        result = runner.invoke(main, ["report", *manifest_arg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "report.json").read_text())
        assert doc["schema_version"] == 1
        scene_dirs = sorted(p.name for p in (out / "heatmaps").iterdir())
        assert len(scene_dirs) == 30
        pngs = sorted(p.name for p in (out / "heatmaps" / scene_dirs[0]).iterdir())
        assert pngs == ["entropy.png", "mean_prob.png", "mutual_info.png", "variance.png"]

    def test_no_heatmaps_flag(self, runner, workdir, manifest_arg):
        out = workdir / "report_bare"
        result = runner.invoke(main, ["report", *manifest_arg, "--no-heatmaps",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "report.json").exists()
        assert not (out / "heatmaps").exists()

    def test_worker_count_does_not_change_bytes(self, runner, workdir, manifest_arg):
        serial = workdir / "report"  # written by the first test above
        parallel = workdir / "report_w8"
        result = runner.invoke(main, ["report", *manifest_arg, "--workers", "8",
                                      "--no-heatmaps", "--out", str(parallel)])
        assert result.exit_code == 0, result.output
        assert (serial / "report.json").read_bytes() == (parallel / "report.json").read_bytes()

    def test_unknown_config_key_is_config_error(self, runner, workdir, manifest_arg):
        result = runner.invoke(main, ["report", *manifest_arg, "--set", "bogus=1",
                                      "--out", str(workdir / "nope")])
        assert result.exit_code == 2
        assert "config error" in result.output


class TestServeCommand:
    def test_missing_report_dir_is_data_error(self, runner, tmp_path):
        result = runner.invoke(main, ["serve", "--report-dir", str(tmp_path)])
        assert result.exit_code == 3
        assert "data error" in result.output


class TestHelp:
    def test_lists_every_command(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for command in ("synth", "fit", "score-ood", "score-uncertainty", "evaluate",
                        "discard", "fuse", "link", "report", "serve"):
            assert command in result.output
