"""Dataset manifests: one JSON file naming every artifact of a dataset
(feature matrices, per-scene stacks/masks, attribute CSV) with a sha256
per file. Loading is eager and validating; a loaded dataset is
internally consistent or an error names exactly what is wrong.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .datamodel import SPACE_TAGS, AttributeTable, FeatureMatrix, PredictionStack, SceneRecord
from .errors import ChecksumError, ManifestError
from .tensorfile import read_tensor

POPULATIONS = ("reference", "scenes")


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Dataset:
    """A fully loaded, checksum-verified dataset."""

    name: str
    features: dict[str, FeatureMatrix]
    feature_populations: dict[str, str]
    scene_ids: list[str]
    stacks: dict[str, PredictionStack]
    attributes: Optional[AttributeTable]
    manifest_path: Path
    manifest_digest: str
    file_digests: dict[str, str] = field(default_factory=dict)

    def scene_records(self) -> list[SceneRecord]:
        return [SceneRecord(scene_id=sid) for sid in self.scene_ids]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ManifestError(msg)


def _verify(path: Path, expected: str) -> None:
    if not path.exists():
        raise ManifestError(f"manifest references missing file: {path}")
    actual = file_sha256(path)
    if actual != expected:
        raise ChecksumError(f"checksum mismatch for {path}: {actual} != {expected}")


def load_manifest(path: str | Path) -> Dataset:
    """Load and validate a dataset manifest.

    Checks performed: schema shape, file existence, per-file sha256,
    unique scene ids, scene-population feature matrices carry exactly the
    manifest's scene ids, attribute rows reference known scenes only.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    _require(isinstance(doc, dict), "manifest must be a JSON object")
    _require(isinstance(doc.get("dataset"), str), "manifest.dataset must be a string")
    _require(isinstance(doc.get("scenes"), list), "manifest.scenes must be a list")
    _require(
        isinstance(doc.get("feature_matrices"), dict),
        "manifest.feature_matrices must be an object",
    )
    base = path.parent
    digests: dict[str, str] = {}

    scene_ids: list[str] = []
    stacks: dict[str, PredictionStack] = {}
    for entry in doc["scenes"]:
        _require(isinstance(entry, dict), "scene entry must be an object")
        sid = entry.get("scene_id")
        _require(isinstance(sid, str) and sid != "", "scene_id must be a string")
        _require(sid not in stacks, f"duplicate scene_id {sid!r}")
        scene_ids.append(sid)
        sha = entry.get("sha256", {})
        stack_rel = entry.get("stack")
        _require(isinstance(stack_rel, str), f"scene {sid}: stack path required")
        stack_path = base / stack_rel
        _verify(stack_path, sha.get("stack", ""))
        digests[stack_rel] = sha["stack"]
        probs = read_tensor(stack_path, require_finite=True)
        mask = None
        if entry.get("mask") is not None:
            mask_path = base / entry["mask"]
            _verify(mask_path, sha.get("mask", ""))
            digests[entry["mask"]] = sha["mask"]
            mask = read_tensor(mask_path)
        stacks[sid] = PredictionStack(scene_id=sid, probs=probs, mask=mask)

    features: dict[str, FeatureMatrix] = {}
    populations: dict[str, str] = {}
    for name, entry in doc["feature_matrices"].items():
        _require(isinstance(entry, dict), f"feature matrix {name}: bad entry")
        space = entry.get("space")
        _require(space in SPACE_TAGS, f"feature matrix {name}: bad space {space!r}")
        population = entry.get("population")
        _require(
            population in POPULATIONS,
            f"feature matrix {name}: population must be one of {POPULATIONS}",
        )
        sha = entry.get("sha256", {})
        values_path = base / entry["values"]
        ids_path = base / entry["ids"]
        _verify(values_path, sha.get("values", ""))
        _verify(ids_path, sha.get("ids", ""))
        digests[entry["values"]] = sha["values"]
        digests[entry["ids"]] = sha["ids"]
        ids = json.loads(ids_path.read_text(encoding="utf-8"))
        _require(
            isinstance(ids, list) and all(isinstance(i, str) for i in ids),
            f"feature matrix {name}: ids file must hold a list of strings",
        )
        values = read_tensor(values_path, require_finite=True)
        features[name] = FeatureMatrix(tuple(ids), values, space)
        populations[name] = population
        if population == "scenes" and set(ids) != set(scene_ids):
            missing = sorted(set(scene_ids) - set(ids))[:3]
            extra = sorted(set(ids) - set(scene_ids))[:3]
            raise ManifestError(
                f"feature matrix {name}: sample ids do not match scenes "
                f"(missing {missing}, dangling {extra})"
            )

    attributes = None
    if doc.get("attributes") is not None:
        entry = doc["attributes"]
        attr_path = base / entry["path"]
        _verify(attr_path, entry.get("sha256", ""))
        digests[entry["path"]] = entry["sha256"]
        attributes = AttributeTable.from_csv(attr_path)
        dangling = sorted(set(attributes.scene_ids()) - set(scene_ids))
        if dangling:
            raise ManifestError(
                f"attribute table references unknown scene ids: {dangling[:5]}"
            )

    return Dataset(
        name=doc["dataset"],
        features=features,
        feature_populations=populations,
        scene_ids=scene_ids,
        stacks=stacks,
        attributes=attributes,
        manifest_path=path,
        manifest_digest=hashlib.sha256(path.read_bytes()).hexdigest(),
        file_digests=digests,
    )


def write_manifest(
    path: str | Path,
    dataset: str,
    feature_entries: dict[str, dict],
    scene_entries: list[dict],
    attributes_rel: Optional[str] = None,
) -> None:
    """Assemble and write a manifest, computing sha256 for every file.

    ``feature_entries`` maps name -> {values, ids, space, population};
    ``scene_entries`` is a list of {scene_id, stack, mask?}, all paths
    relative to the manifest.
    """
    path = Path(path)
    base = path.parent
    doc: dict = {"dataset": dataset, "feature_matrices": {}, "scenes": []}
    for name, entry in feature_entries.items():
        doc["feature_matrices"][name] = {
            "values": entry["values"],
            "ids": entry["ids"],
            "space": entry["space"],
            "population": entry["population"],
            "sha256": {
                "values": file_sha256(base / entry["values"]),
                "ids": file_sha256(base / entry["ids"]),
            },
        }
    for entry in scene_entries:
        rec = {
            "scene_id": entry["scene_id"],
            "stack": entry["stack"],
            "mask": entry.get("mask"),
            "sha256": {"stack": file_sha256(base / entry["stack"])},
        }
        if entry.get("mask") is not None:
            rec["sha256"]["mask"] = file_sha256(base / entry["mask"])
        doc["scenes"].append(rec)
    if attributes_rel is not None:
        doc["attributes"] = {
            "path": attributes_rel,
            "sha256": file_sha256(base / attributes_rel),
        }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
