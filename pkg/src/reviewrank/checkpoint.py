"""Versioned binary checkpoints.

Layout: magic ``SNCL``, little-endian u32 format version, u32 metadata
length plus UTF-8 JSON (config and vocabulary), u32 block count, then one
block per parameter: u32 name length, name bytes, u32 rows, u32 cols, and a
row-major little-endian f32 payload. Payloads are stored in f32 regardless
of the model's working precision.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .config import TrainConfig, from_mapping
from .errors import CheckpointError
from .model import HelpfulnessModel

MAGIC = b"SNCL"
VERSION = 1


def save_checkpoint(path, model):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = json.dumps(
        {
            "config": dataclasses.asdict(model.config),
            "vocab": model.vocab,
        },
        ensure_ascii=False,
    ).encode("utf-8")
    params = model.named_parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(params)))
        for name, param in params.items():
            encoded = name.encode("utf-8")
            payload = np.ascontiguousarray(param.data, dtype="<f4")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", payload.shape[0], payload.shape[1]))
            fh.write(payload.tobytes())


def _read(fh, n, what):
    blob = fh.read(n)
    if len(blob) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return blob


def read_checkpoint(path):
    """Raw contents: (version, config dict, vocab, {name: f32 array})."""
    path = Path(path)
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a checkpoint")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {version} (reader supports {VERSION})"
            )
        (meta_len,) = struct.unpack("<I", _read(fh, 4, "metadata length"))
        try:
            meta = json.loads(_read(fh, meta_len, "metadata"))
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{path}: corrupt metadata: {e}")
        (count,) = struct.unpack("<I", _read(fh, 4, "block count"))
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read(fh, 4, "name length"))
            name = _read(fh, name_len, "name").decode("utf-8")
            rows, cols = struct.unpack("<II", _read(fh, 8, "dims"))
            payload = _read(fh, rows * cols * 4, f"payload of {name}")
            params[name] = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError(f"{path}: trailing bytes after last block")
    return version, meta.get("config", {}), meta.get("vocab", []), params


def load_model(path, config_overrides=None):
    """Rebuild the model a checkpoint describes and load its weights."""
    version, config_map, vocab, params = read_checkpoint(path)
    config_map.update(config_overrides or {})
    config = from_mapping(TrainConfig, config_map).validate()
    model = HelpfulnessModel(config, vocab)
    own = model.named_parameters()
    missing = sorted(set(own) - set(params))
    surplus = sorted(set(params) - set(own))
    if missing or surplus:
        raise CheckpointError(
            f"checkpoint v{version} does not match the configured model: "
            f"missing={missing[:3]} surplus={surplus[:3]}"
        )
    for name, param in own.items():
        stored = params[name]
        if stored.shape != param.data.shape:
            raise CheckpointError(
                f"checkpoint v{version}: parameter {name} has shape {stored.shape}, "
                f"config implies {param.data.shape}"
            )
        param.data[...] = stored.astype(param.data.dtype)
    return model
