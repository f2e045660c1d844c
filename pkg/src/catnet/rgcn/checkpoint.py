"""Versioned JSON checkpoints for trained models.

Arrays are stored as base64 little-endian float64 with explicit shapes so
a checkpoint round-trips bit for bit on any platform.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .train import TrainConfig, TrainResult

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def _enc(a: np.ndarray) -> dict:
    arr = np.ascontiguousarray(a, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _dec(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(float)
    return arr.reshape(doc["shape"])


def save_checkpoint(result: TrainResult, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": result.config.to_dict(),
        "target_mean": result.target_mean,
        "target_std": result.target_std,
        "best_epoch": result.best_epoch,
        "n_parameters": result.n_parameters,
        "params": {
            "layers": [
                {key: _enc(layer[key]) for key in ("bases", "coeffs", "self")}
                for layer in result.params["layers"]
            ],
            "head_w": _enc(result.params["head_w"]),
            "head_b": _enc(result.params["head_b"]),
            "embed": _enc(result.params["embed"]),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_checkpoint(path) -> TrainResult:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version!r} (want {FORMAT_VERSION})"
        )
    cfg = doc["config"]
    config = TrainConfig(**cfg)
    params = {
        "layers": [
            {key: _dec(layer[key]) for key in ("bases", "coeffs", "self")}
            for layer in doc["params"]["layers"]
        ],
        "head_w": _dec(doc["params"]["head_w"]),
        "head_b": _dec(doc["params"]["head_b"]),
        "embed": _dec(doc["params"]["embed"]),
    }
    return TrainResult(
        params=params,
        config=config,
        target_mean=doc["target_mean"],
        target_std=doc["target_std"],
        best_epoch=doc["best_epoch"],
        history=[],
        n_parameters=doc["n_parameters"],
    )
