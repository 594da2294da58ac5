"""Versioned JSON checkpoints: config plus base64-encoded fp64 parameters.

Arrays are serialized as little-endian float64 bytes, so save/load
round-trips are bit-exact.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])


def save_checkpoint(path, kind: str, config: dict, params: dict, extra: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config,
        "params": {name: _encode_array(np.asarray(v, dtype=np.float64))
                   for name, v in params.items()},
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path, expect_kind: str | None = None) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
    if expect_kind is not None and payload.get("kind") != expect_kind:
        raise CheckpointError(
            f"checkpoint kind {payload.get('kind')!r}, expected {expect_kind!r}")
    payload["params"] = {name: _decode_array(d) for name, d in payload["params"].items()}
    return payload
