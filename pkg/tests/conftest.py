"""Shared fixtures: one small synthetic dataset generated per session.

Individual test modules generate their own datasets when they need a
different shape; this one is sized for speed.
"""

import pytest

from segrel.config import PipelineConfig
from segrel.synth import SynthConfig, synth_generate


SMALL_SYNTH = SynthConfig(
    seed=7,
    n_components=5,
    n_features_raw=4,
    n_features_embedding=6,
    n_reference=150,
    n_scenes=30,
    image_height=16,
    image_width=16,
    ensemble_size=6,
)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth-small")
    return synth_generate(SMALL_SYNTH, out)


@pytest.fixture(scope="session")
def small_pipeline_config():
    return PipelineConfig(
        seed=7,
        k_raw=5,
        k_embedding=5,
        kmeans_n_init=4,
        calibration_bins=10,
        density_bins=12,
    )
