"""Bit-exact binary tensor dumps and dataset manifests.

Dump layout (all little-endian):

    bytes 0-3   magic "EOOD" (0x45 0x4F 0x4F 0x44)
    bytes 4-5   version, uint16 (currently 1)
    bytes 6-7   ndim, uint16
    next 4*ndim dims, uint32 each
    payload     product(dims) float32 values, row-major

This file is the wire contract with the feature extractor; change it
only together with a version bump.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptionError, DomainError, FormatError, ManifestError
from .types import SampleRecord, Split

MAGIC = b"EOOD"
DUMP_VERSION = 1
DEFAULT_MAX_BYTES = 1 << 30  # refuse to allocate beyond 1 GiB per dump

MANIFEST_FORMAT = "eood-manifest"
MANIFEST_VERSION = 1


def _payload_array(tensor) -> np.ndarray:
    if hasattr(tensor, "data") and isinstance(getattr(tensor, "data"), np.ndarray):
        arr = tensor.data  # FeatureMap
    elif hasattr(tensor, "pixels") and isinstance(getattr(tensor, "pixels"), np.ndarray):
        arr = tensor.pixels  # Image
    elif hasattr(tensor, "values") and isinstance(getattr(tensor, "values"), np.ndarray):
        arr = tensor.values  # LogitsVector / SampleMatrix
    else:
        arr = np.asarray(tensor)
    if arr.ndim < 1:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise DomainError("refusing to dump non-finite values")
    return np.ascontiguousarray(arr, dtype="<f4")


def write_dump(tensor, path) -> None:
    """Write a tensor dump atomically (temp file + rename)."""
    arr = _payload_array(tensor)
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


def read_dump(path, max_bytes: int = DEFAULT_MAX_BYTES) -> np.ndarray:
    """Read a dump back as a float32 array; inverse of write_dump."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8:
            raise CorruptionError(f"{path}: file shorter than the fixed header")
        if head[:4] != MAGIC:
            raise FormatError(f"{path}: bad magic {head[:4]!r}")
        version, ndim = struct.unpack("<HH", head[4:8])
        if version != DUMP_VERSION:
            raise FormatError(f"{path}: unsupported dump version {version}")
        dim_bytes = fh.read(4 * ndim)
        if len(dim_bytes) < 4 * ndim:
            raise CorruptionError(f"{path}: truncated dims block")
        dims = struct.unpack(f"<{ndim}I", dim_bytes) if ndim else ()
        count = 1
        for d in dims:
            count *= int(d)  # python ints: no overflow before the cap check
        count = count if ndim else 0
        if count * 4 > max_bytes:
            raise CorruptionError(f"{path}: payload {count * 4} bytes exceeds cap {max_bytes}")
        payload = fh.read(count * 4 + 1)
        if len(payload) < count * 4:
            raise CorruptionError(f"{path}: payload truncated ({len(payload)} of {count * 4} bytes)")
        if len(payload) > count * 4:
            raise CorruptionError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f4", count=count).reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{path}: payload contains non-finite values")
    return arr.copy()


@dataclass
class Manifest:
    """A dataset: named records plus the block count L of the source network.

    Dump paths inside records are relative to `root` (the manifest's own
    directory); existence is checked lazily when a dump is read.
    """

    dataset_name: str
    records: list[SampleRecord]
    block_count: int
    created_with: str = ""
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.block_count < 0:
            raise ManifestError("block_count must be >= 0")
        seen = set()
        for rec in self.records:
            if rec.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)
            bad = [b for b, _ in rec.block_refs if b > self.block_count]
            if bad:
                raise ManifestError(
                    f"record {rec.sample_id!r} references blocks {bad} beyond L={self.block_count}"
                )

    def resolve(self, ref: str) -> Path:
        return self.root / ref

    def by_split(self, split: Split) -> list[SampleRecord]:
        return [r for r in self.records if r.split is split]

    def to_obj(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "dataset_name": self.dataset_name,
            "block_count": self.block_count,
            "created_with": self.created_with,
            "records": [r.to_obj() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2) + "\n"


def save_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"{path}: not a manifest document")
    if obj.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported manifest version {obj.get('version')}")
    try:
        records = [SampleRecord.from_obj(r) for r in obj["records"]]
        manifest = Manifest(
            dataset_name=str(obj["dataset_name"]),
            records=records,
            block_count=int(obj["block_count"]),
            created_with=str(obj.get("created_with", "")),
            root=path.parent,
        )
    except ManifestError:
        raise
    except Exception as exc:
        raise ManifestError(f"{path}: schema violation: {exc}") from exc
    return manifest
