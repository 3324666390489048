"""Versioned binary model files.

Byte layout (all integers little-endian)::

    offset 0   8 bytes   magic b"SEGGNMDL"
    offset 8   uint32    format version (currently 1)
    offset 12  uint32    manifest length M in bytes
    offset 16  M bytes   UTF-8 JSON manifest (sorted keys, no whitespace)
    then       raw float64 little-endian arrays, C order, concatenated in
               manifest order

The manifest holds the model configuration and, for each array, its name,
shape, byte offset (relative to the start of the data section) and size.
Arrays are the network parameters plus ``norm.mean`` and ``norm.std``.
The same model always serialises to the same bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import CorruptRecord, SchemaVersionMismatch
from .model import SeggnModel

MAGIC = b"SEGGNMDL"
VERSION = 1
_HEADER = struct.Struct("<8sII")


def model_to_bytes(model: SeggnModel, meta: dict | None = None) -> bytes:
    arrays = dict(model.params)
    arrays["norm.mean"] = model.feat_mean
    arrays["norm.std"] = model.feat_std
    entries, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    manifest = {"config": model.config(), "arrays": entries, "meta": meta or {}}
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(text)) + text + b"".join(blobs)


def model_from_bytes(buf: bytes):
    """Return ``(model, meta)``."""
    if len(buf) < _HEADER.size:
        raise CorruptRecord("model file too short")
    magic, version, n = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CorruptRecord("not a model file (bad magic)")
    if version != VERSION:
        raise SchemaVersionMismatch(f"model format version {version}, this reader supports {VERSION}")
    try:
        manifest = json.loads(buf[_HEADER.size : _HEADER.size + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptRecord(f"unreadable model manifest: {exc}") from None
    cfg = manifest["config"]
    model = SeggnModel(cfg["widths"], cfg["window"], cfg["dropout"], cfg["n_features"])
    base = _HEADER.size + n
    arrays = {}
    for e in manifest["arrays"]:
        start = base + e["offset"]
        if start + e["nbytes"] > len(buf):
            raise CorruptRecord(f"model file truncated inside array {e['name']!r}")
        arrays[e["name"]] = np.frombuffer(buf, dtype="<f8", count=e["nbytes"] // 8, offset=start).reshape(e["shape"]).astype(float)
    expected = set(model.params) | {"norm.mean", "norm.std"}
    if set(arrays) != expected:
        raise CorruptRecord("model arrays do not match the configured architecture")
    for k in model.params:
        if arrays[k].shape != model.params[k].shape:
            raise CorruptRecord(f"array {k!r} has shape {arrays[k].shape}, expected {model.params[k].shape}")
        model.params[k] = arrays[k]
    model.feat_mean = arrays["norm.mean"]
    model.feat_std = arrays["norm.std"]
    return model, manifest.get("meta", {})


def save_model(model: SeggnModel, path, meta: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model, meta))


def load_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
