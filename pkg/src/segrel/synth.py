"""Deterministic synthetic datasets for tests and demos.

Generative recipe (single seeded PCG64 stream, fixed draw order, so a
given config is bitwise reproducible):

1.  Mixture centers per space (raw, embedding): rejection-sampled
    uniformly in a box until all pairwise distances >= center_gap.
2.  Reference features: each sample picks a component uniformly and
    adds N(0, sigma^2 I) noise, in both spaces with shared component.
3.  Scenes: a fixed count round(ood_fraction * n) is marked OOD
    (positions shuffled). Scene features follow the mixture; OOD scenes
    are additionally shifted by ood_shift * sigma along a random unit
    direction. Each scene gets a difficulty in [0,1] mixing a uniform
    draw with its OOD flag, so OOD correlates with failure.
4.  Truth masks: a filled disk at a random center/radius (or empty with
    probability empty_truth_frac).
5.  Prediction stacks: member probabilities are
    sigmoid(sharpness * (2*mask - 1)
            + difficulty * shared_noise_scale * eta
            + difficulty * member_noise_scale * eps_m)
    where eta is one pixel-noise field shared by all members (a
    systematic error that survives ensemble averaging and flips
    predictions, degrading F1) and eps_m is iid per member (pure
    disagreement, raising ensemble variance). Both scale with the
    scene's difficulty, so the variance flag genuinely predicts F1.
6.  Attributes: elevation falls and river_area rises with difficulty,
    pasture is independent noise; a small fraction of values go missing.

Alongside the manifest a ``synth_truth.json`` records the per-scene
difficulty, OOD flag and component, plus the true centers, so tests can
check recovery against ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datamodel import AttributeTable
from .errors import ConfigError
from .manifest import Dataset, load_manifest, write_manifest
from .tensorfile import write_tensor

ATTRIBUTE_NAMES = ("elevation", "river_area", "pasture")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_components: int = 15
    n_features_raw: int = 8
    n_features_embedding: int = 16
    sigma: float = 0.1
    center_gap: float = 2.0
    center_box: float = 10.0
    n_reference: int = 500
    n_scenes: int = 60
    ood_fraction: float = 0.25
    ood_shift: float = 5.0  # in multiples of sigma
    ensemble_size: int = 8
    image_height: int = 32
    image_width: int = 32
    sharpness: float = 3.0
    shared_noise_scale: float = 6.0
    member_noise_scale: float = 3.0
    difficulty_ood_weight: float = 0.35
    empty_truth_frac: float = 0.0
    attr_missing_frac: float = 0.02

    def __post_init__(self):
        counts = {
            "n_components": self.n_components,
            "n_features_raw": self.n_features_raw,
            "n_features_embedding": self.n_features_embedding,
            "n_reference": self.n_reference,
            "n_scenes": self.n_scenes,
            "ensemble_size": self.ensemble_size,
            "image_height": self.image_height,
            "image_width": self.image_width,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.center_gap <= 0 or self.center_box <= 0:
            raise ConfigError("center_gap and center_box must be > 0")
        if not 0.0 <= self.ood_fraction <= 1.0:
            raise ConfigError("ood_fraction must be in [0,1]")
        if self.ood_shift < 0:
            raise ConfigError("ood_shift must be >= 0")
        if not 0.0 <= self.difficulty_ood_weight <= 1.0:
            raise ConfigError("difficulty_ood_weight must be in [0,1]")
        if not 0.0 <= self.empty_truth_frac <= 1.0:
            raise ConfigError("empty_truth_frac must be in [0,1]")
        if not 0.0 <= self.attr_missing_frac <= 1.0:
            raise ConfigError("attr_missing_frac must be in [0,1]")


def make_centers(
    n_components: int,
    n_features: int,
    rng: np.random.Generator,
    *,
    gap: float = 2.0,
    box: float = 10.0,
    max_tries: int = 100_000,
) -> np.ndarray:
    """Rejection-sample well-separated mixture centers."""
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < n_components:
        tries += 1
        if tries > max_tries:
            raise ConfigError(
                f"cannot place {n_components} centers with gap {gap} "
                f"in a box of half-width {box}"
            )
        cand = rng.uniform(-box, box, size=n_features)
        if all(np.linalg.norm(cand - c) >= gap for c in centers):
            centers.append(cand)
    return np.vstack(centers)


def sample_mixture(
    centers: np.ndarray,
    sigma: float,
    n: int,
    rng: np.random.Generator,
    *,
    components: np.ndarray | None = None,
    shift: float = 0.0,
) -> np.ndarray:
    """Draw n points from the isotropic mixture; optional radial shift
    (in absolute units) along a random unit direction per point."""
    if components is None:
        components = rng.integers(centers.shape[0], size=n)
    X = centers[components] + sigma * rng.standard_normal((n, centers.shape[1]))
    if shift > 0.0:
        directions = rng.standard_normal((n, centers.shape[1]))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        X = X + shift * directions
    return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _disk_mask(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    cy = rng.uniform(0.25, 0.75) * h
    cx = rng.uniform(0.25, 0.75) * w
    r = rng.uniform(0.15, 0.3) * min(h, w)
    yy, xx = np.mgrid[0:h, 0:w]
    return (((yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2) <= r * r).astype(np.uint8)


def synth_generate(cfg: SynthConfig, out_dir: str | Path) -> Dataset:
    """Generate a manifest-backed dataset under out_dir and load it back
    (so every checksum is verified on the way out)."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    centers_raw = make_centers(
        cfg.n_components, cfg.n_features_raw, rng, gap=cfg.center_gap, box=cfg.center_box
    )
    centers_emb = make_centers(
        cfg.n_components,
        cfg.n_features_embedding,
        rng,
        gap=cfg.center_gap,
        box=cfg.center_box,
    )

    ref_ids = [f"ref_{i:04d}" for i in range(cfg.n_reference)]
    ref_components = rng.integers(cfg.n_components, size=cfg.n_reference)
    ref_raw = sample_mixture(
        centers_raw, cfg.sigma, cfg.n_reference, rng, components=ref_components
    )
    ref_emb = sample_mixture(
        centers_emb, cfg.sigma, cfg.n_reference, rng, components=ref_components
    )

    scene_ids = [f"scene_{i:04d}" for i in range(cfg.n_scenes)]
    n_ood = int(math.floor(cfg.ood_fraction * cfg.n_scenes + 0.5))
    ood_flags = np.zeros(cfg.n_scenes, dtype=bool)
    ood_flags[:n_ood] = True
    ood_flags = ood_flags[rng.permutation(cfg.n_scenes)]

    scene_components = rng.integers(cfg.n_components, size=cfg.n_scenes)
    base_u = rng.uniform(0.0, 1.0, size=cfg.n_scenes)
    w = cfg.difficulty_ood_weight
    difficulty = np.clip((1.0 - w) * base_u + w * ood_flags, 0.0, 1.0)

    scene_raw = np.empty((cfg.n_scenes, cfg.n_features_raw))
    scene_emb = np.empty((cfg.n_scenes, cfg.n_features_embedding))
    for i in range(cfg.n_scenes):
        shift = cfg.ood_shift * cfg.sigma if ood_flags[i] else 0.0
        scene_raw[i] = sample_mixture(
            centers_raw, cfg.sigma, 1, rng,
            components=scene_components[i : i + 1], shift=shift,
        )[0]
        scene_emb[i] = sample_mixture(
            centers_emb, cfg.sigma, 1, rng,
            components=scene_components[i : i + 1], shift=shift,
        )[0]

    h, wid = cfg.image_height, cfg.image_width
    scene_entries: list[dict] = []
    for i, sid in enumerate(scene_ids):
        empty = rng.uniform() < cfg.empty_truth_frac
        mask = (
            np.zeros((h, wid), dtype=np.uint8) if empty else _disk_mask(h, wid, rng)
        )
        logits = cfg.sharpness * (2.0 * mask.astype(np.float64) - 1.0)
        shared = rng.standard_normal((h, wid))
        member = rng.standard_normal((cfg.ensemble_size, h, wid))
        probs = _sigmoid(
            logits[None, :, :]
            + difficulty[i] * cfg.shared_noise_scale * shared[None, :, :]
            + difficulty[i] * cfg.member_noise_scale * member
        )
        stack_rel = f"scenes/{sid}.stack.shrt"
        mask_rel = f"scenes/{sid}.mask.shrt"
        write_tensor(probs, out / stack_rel)
        write_tensor(mask, out / mask_rel)
        scene_entries.append({"scene_id": sid, "stack": stack_rel, "mask": mask_rel})

    attr_rows: dict[str, dict] = {}
    for i, sid in enumerate(scene_ids):
        elevation = 120.0 - 100.0 * difficulty[i] + 5.0 * rng.standard_normal()
        river = 10.0 + 90.0 * difficulty[i] + 5.0 * rng.standard_normal()
        pasture = rng.uniform(0.0, 100.0)
        row = {"elevation": elevation, "river_area": river, "pasture": pasture}
        for name in ATTRIBUTE_NAMES:
            if rng.uniform() < cfg.attr_missing_frac:
                row[name] = None
        attr_rows[sid] = row
    attributes = AttributeTable(list(ATTRIBUTE_NAMES), attr_rows)
    (out / "attributes.csv").write_text(attributes.to_csv_text(), encoding="utf-8")

    matrices = {
        "reference_raw": (ref_ids, ref_raw, "raw", "reference"),
        "reference_embedding": (ref_ids, ref_emb, "embedding", "reference"),
        "scenes_raw": (scene_ids, scene_raw, "raw", "scenes"),
        "scenes_embedding": (scene_ids, scene_emb, "embedding", "scenes"),
    }
    feature_entries: dict[str, dict] = {}
    for name, (ids, values, space, population) in matrices.items():
        values_rel = f"features/{name}.shrt"
        ids_rel = f"features/{name}.ids.json"
        write_tensor(np.asarray(values, dtype=np.float64), out / values_rel)
        (out / ids_rel).write_text(
            json.dumps(list(ids), indent=2) + "\n", encoding="utf-8"
        )
        feature_entries[name] = {
            "values": values_rel,
            "ids": ids_rel,
            "space": space,
            "population": population,
        }

    truth = {
        "config": asdict(cfg),
        "centers_raw": centers_raw.tolist(),
        "centers_embedding": centers_emb.tolist(),
        "scenes": [
            {
                "scene_id": sid,
                "component": int(scene_components[i]),
                "ood": bool(ood_flags[i]),
                "difficulty": float(difficulty[i]),
            }
            for i, sid in enumerate(scene_ids)
        ],
    }
    (out / "synth_truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    write_manifest(
        out / "manifest.json",
        dataset=f"synth-seed{cfg.seed}",
        feature_entries=feature_entries,
        scene_entries=scene_entries,
        attributes_rel="attributes.csv",
    )
    return load_manifest(out / "manifest.json")
