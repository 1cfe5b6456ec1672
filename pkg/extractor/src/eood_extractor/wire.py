"""Writer/reader for the engine's binary dump format and manifest schema.

Implemented against the documented wire contract (see the engine README):
little-endian, magic "EOOD", uint16 version=1, uint16 ndim, uint32 dims,
float32 row-major payload. Manifests are versioned JSON with records of
(sample_id, split, block_refs, optional logits_ref); paths relative to
the manifest's directory. This module is intentionally independent of the
engine package so the two sides of the contract stay separable.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"EOOD"
DUMP_VERSION = 1
MANIFEST_FORMAT = "eood-manifest"
MANIFEST_VERSION = 1

PSEUDO_SUFFIX = "::jigsaw"


def write_tensor(array, path) -> None:
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    if arr.ndim < 1:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to dump non-finite values")
    header = MAGIC + struct.pack("<HH", DUMP_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise ValueError(f"{path}: not an EOOD dump")
        version, ndim = struct.unpack("<HH", head[4:8])
        if version != DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        count = 1
        for d in dims:
            count *= int(d)
        payload = fh.read(count * 4)
        if len(payload) < count * 4:
            raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4", count=count).reshape(dims).copy()


def record_obj(sample_id: str, split: str, block_refs, logits_ref=None) -> dict:
    obj = {
        "sample_id": sample_id,
        "split": split,
        "block_refs": [[int(b), str(p)] for b, p in sorted(block_refs)],
    }
    if logits_ref is not None:
        obj["logits_ref"] = str(logits_ref)
    return obj


def manifest_obj(dataset_name: str, records: list[dict], block_count: int,
                 created_with: str = "", warnings: list[str] | None = None) -> dict:
    obj = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "dataset_name": dataset_name,
        "block_count": int(block_count),
        "created_with": created_with,
        "records": records,
    }
    if warnings:
        obj["warnings"] = list(warnings)
    return obj


def save_manifest(obj: dict, path) -> None:
    path = Path(path)
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path) -> dict:
    path = Path(path)
    obj = json.loads(path.read_text(encoding="utf-8"))
    if obj.get("format") != MANIFEST_FORMAT or obj.get("version") != MANIFEST_VERSION:
        raise ValueError(f"{path}: not a recognized manifest")
    return obj
