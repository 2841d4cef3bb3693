"""Versioned, human-readable model checkpoints with exact float round-trips.

The on-disk format is JSON with every float printed at 17 significant
digits, which reproduces the original double bit-for-bit on load.  Writes
go through a temp file and rename, so a failed save never leaves a partial
checkpoint behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ValidationError
from .models import TrainConfig
from .training import build_model
from .windows import FeatureSetSpec, Normalizer

CHECKPOINT_VERSION = 1


@dataclass
class ModelCheckpoint:
    format_version: int
    model_type: str
    config: TrainConfig
    feature_spec: FeatureSetSpec
    normalizer: Normalizer
    n_companies: int
    tensors: dict[str, np.ndarray]


def _emit(obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _emit(value, out)
        out.append("]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format(float(obj), ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif obj is None:
        out.append("null")
    else:
        raise ValidationError(f"cannot serialize {type(obj).__name__} in a checkpoint")


def write_atomic(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(
    path: Path | str,
    model,
    config: TrainConfig,
    feature_spec: FeatureSetSpec,
    normalizer: Normalizer,
    n_companies: int,
) -> None:
    tensors = []
    for param in model.parameters():
        if not np.isfinite(param.data).all():
            raise ValidationError(f"refusing to save non-finite tensor {param.name!r}")
        tensors.append(
            {
                "name": param.name,
                "shape": list(param.data.shape),
                "values": param.data.reshape(-1).tolist(),
            }
        )
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "model_type": model.kind,
        "train_config": config.to_dict(),
        "feature_set": {"kind": feature_spec.kind, "embedding_dim": feature_spec.embedding_dim},
        "n_companies": n_companies,
        "normalizer": normalizer.to_dict(),
        "tensors": tensors,
    }
    out: list[str] = []
    _emit(doc, out)
    write_atomic(path, "".join(out) + "\n")


def load_checkpoint(path: Path | str) -> ModelCheckpoint:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable or truncated checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = doc["format_version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format version {version}")
    try:
        config = TrainConfig.from_dict(doc["train_config"])
        spec = FeatureSetSpec(doc["feature_set"]["kind"], doc["feature_set"]["embedding_dim"])
        normalizer = Normalizer.from_dict(doc["normalizer"])
        n_companies = int(doc["n_companies"])
        model_type = doc["model_type"]
        tensors = {}
        for entry in doc["tensors"]:
            data = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            tensors[entry["name"]] = data
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint: {exc}") from exc
    return ModelCheckpoint(
        format_version=version,
        model_type=model_type,
        config=config,
        feature_spec=spec,
        normalizer=normalizer,
        n_companies=n_companies,
        tensors=tensors,
    )


def restore_model(checkpoint: ModelCheckpoint):
    """Rebuild the model skeleton from config and load its tensors exactly."""
    rng = np.random.default_rng(0)  # shapes only; values are overwritten
    model = build_model(
        checkpoint.model_type,
        checkpoint.config,
        len(checkpoint.normalizer.columns),
        checkpoint.n_companies,
        rng,
        close_col=checkpoint.normalizer.close_index,
    )
    params = {p.name: p for p in model.parameters()}
    if set(params) != set(checkpoint.tensors):
        missing = sorted(set(params) ^ set(checkpoint.tensors))
        raise CheckpointError(f"checkpoint tensors do not match model structure: {missing}")
    for name, param in params.items():
        data = checkpoint.tensors[name]
        if data.shape != param.data.shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {data.shape}, config implies {param.data.shape}"
            )
        param.data = data.copy()
    return model
