"""Versioned binary checkpoint: JSON header + little-endian f32 tensor payload.

The header carries a config echo, tensor manifest, and the SHA-256 of the
payload so a corrupted or truncated file is rejected at load time.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from ..errors import ArtifactError, ArtifactVersionError
from .config import XAlignConfig
from .params import TENSOR_ORDER, XAlignParams

_MAGIC = b"XALNCKPT"
_VERSION = 1


def save_checkpoint(path: str | Path, params: XAlignParams, config: XAlignConfig) -> None:
    payload = b"".join(
        np.ascontiguousarray(params[name], dtype="<f4").tobytes() for name in TENSOR_ORDER
    )
    header = {
        "version": _VERSION,
        "config": config.to_dict(),
        "dimension": params.dimension,
        "t": params.t,
        "trained": params.trained,
        "head": {"hidden_layers": 1, "width": params.dimension, "activation": "tanh"},
        "tensors": [
            {"name": name, "shape": list(params[name].shape)} for name in TENSOR_ORDER
        ],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> tuple[XAlignParams, XAlignConfig]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ArtifactVersionError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != _VERSION:
            raise ArtifactVersionError(f"{path}: unsupported checkpoint version")
        payload = fh.read()
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ArtifactVersionError(f"{path}: payload hash mismatch")
    tensors = {}
    offset = 0
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        chunk = payload[offset : offset + 4 * count]
        if len(chunk) != 4 * count:
            raise ArtifactVersionError(f"{path}: truncated payload")
        tensors[spec["name"]] = (
            np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
        )
        offset += 4 * count
    if offset != len(payload):
        raise ArtifactVersionError(f"{path}: trailing bytes in payload")
    params = XAlignParams(tensors=tensors, trained=bool(header["trained"]))
    config = XAlignConfig.from_dict(header["config"])
    return params, config
