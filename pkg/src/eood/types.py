"""Core domain types, pipeline configuration, and seeded random streams.

Everything here is immutable after construction and safe to share across
workers. All randomness in the engine flows from one 64-bit seed through
labeled streams (see seeded_rng); entropies are in nats throughout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, ValidationError

_U64 = (1 << 64) - 1


class Split(str, Enum):
    ID_CALIB = "id_calib"
    PSEUDO_OOD = "pseudo_ood"
    TEST_ID = "test_id"
    TEST_OOD = "test_ood"


class ScoreOrientation(str, Enum):
    """Sign convention for the final score (larger = more ID-like).

    neg_conditional_entropy: score = -f_ce (the presentation default).
    pos_conditional_entropy: score = +f_ce, stored when calibration finds
    ID samples sitting at *higher* conditional entropy than pseudo-OOD.
    """

    NEG_CONDITIONAL_ENTROPY = "neg_conditional_entropy"
    POS_CONDITIONAL_ENTROPY = "pos_conditional_entropy"


def seeded_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Deterministic, platform-independent random stream for (seed, label).

    Identical (seed, stream_label) pairs always yield identical streams;
    distinct labels (or seeds) yield independent streams. The label is
    folded in via SHA-256 so any printable string is a valid label.
    """
    digest = hashlib.sha256(stream_label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]
    ss = np.random.SeedSequence([int(seed) & _U64, *words])
    return np.random.Generator(np.random.PCG64(ss))


def _as_finite_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """One block's activation tensor for one sample: (channels, height, width).

    `data` is row-major (channel, row, column) and must be finite.
    block_index 0 is reserved for raw input images by convention.
    """

    block_index: int
    data: np.ndarray

    def __post_init__(self):
        if self.block_index < 0:
            raise ValidationError("block_index must be >= 0")
        arr = _as_finite_array(self.data, "FeatureMap data")
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(
                f"FeatureMap data must be (channels, height, width), got shape {arr.shape}"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


# Suffix linking a pseudo-OOD record to its source ID record: the jigsaw
# counterpart of sample "s" is the record with sample_id "s::jigsaw".
PSEUDO_SUFFIX = "::jigsaw"


def pseudo_id(sample_id: str) -> str:
    return sample_id + PSEUDO_SUFFIX


@dataclass(frozen=True)
class SampleRecord:
    """A sample's identity, split tag, and per-block dump references.

    block_refs holds (block_index, dump_path) sorted strictly increasing
    by block index; paths are relative to the owning manifest's directory.
    """

    sample_id: str
    split: Split
    block_refs: tuple[tuple[int, str], ...]
    logits_ref: Optional[str] = None

    def __post_init__(self):
        if not self.sample_id:
            raise ValidationError("sample_id must be non-empty")
        split = Split(self.split)
        object.__setattr__(self, "split", split)
        refs = tuple((int(b), str(p)) for b, p in self.block_refs)
        indices = [b for b, _ in refs]
        if any(b < 0 for b in indices):
            raise ValidationError("block indices must be >= 0")
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValidationError("block_refs must be sorted strictly increasing by block_index")
        object.__setattr__(self, "block_refs", refs)

    def dump_path(self, block_index: int) -> Optional[str]:
        for b, p in self.block_refs:
            if b == block_index:
                return p
        return None

    def feature_blocks(self) -> tuple[int, ...]:
        """Block indices excluding the raw-image slot 0."""
        return tuple(b for b, _ in self.block_refs if b >= 1)

    def to_obj(self) -> dict:
        obj = {
            "sample_id": self.sample_id,
            "split": self.split.value,
            "block_refs": [[b, p] for b, p in self.block_refs],
        }
        if self.logits_ref is not None:
            obj["logits_ref"] = self.logits_ref
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "SampleRecord":
        try:
            return cls(
                sample_id=obj["sample_id"],
                split=Split(obj["split"]),
                block_refs=tuple((int(b), str(p)) for b, p in obj["block_refs"]),
                logits_ref=obj.get("logits_ref"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad sample record: {exc}") from exc


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the whole calibration/scoring pipeline.

    k_neighbors and jitter_scale feed the entropy estimator; channel_cap
    bounds the per-block sample-matrix dimension; grid is the jigsaw side;
    calib_sample_cap bounds how many ID calibration pairs are used.
    """

    k_neighbors: int = 3
    jitter_scale: float = 1e-10
    channel_cap: int = 32
    pool_policy: str = "coarser_grid"
    grid: int = 3
    tpr_target: float = 0.95
    rng_seed: int = 0
    score_orientation: ScoreOrientation = ScoreOrientation.NEG_CONDITIONAL_ENTROPY
    calib_sample_cap: int = 1000

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")
        if not (self.jitter_scale > 0):
            raise ValidationError("jitter_scale must be > 0")
        if self.channel_cap < 1:
            raise ValidationError("channel_cap must be >= 1")
        if self.pool_policy != "coarser_grid":
            raise ValidationError(f"unknown pool_policy {self.pool_policy!r}")
        if self.grid < 1:
            raise ValidationError("grid must be >= 1")
        if not (0.0 < self.tpr_target < 1.0):
            raise ValidationError("tpr_target must lie strictly between 0 and 1")
        if not (0 <= int(self.rng_seed) <= _U64):
            raise ValidationError("rng_seed must fit in 64 unsigned bits")
        if self.calib_sample_cap < 1:
            raise ValidationError("calib_sample_cap must be >= 1")
        object.__setattr__(self, "score_orientation", ScoreOrientation(self.score_orientation))

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, rng_seed=int(seed))

    def to_obj(self) -> dict:
        return {
            "k_neighbors": self.k_neighbors,
            "jitter_scale": self.jitter_scale,
            "channel_cap": self.channel_cap,
            "pool_policy": self.pool_policy,
            "grid": self.grid,
            "tpr_target": self.tpr_target,
            "rng_seed": self.rng_seed,
            "score_orientation": self.score_orientation.value,
            "calib_sample_cap": self.calib_sample_cap,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from exc

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


PROFILE_FORMAT = "eood-profile"
PROFILE_VERSION = 1


@dataclass(frozen=True)
class CalibrationProfile:
    """Output of calibration: the selected block, threshold, and CER vector."""

    selected_block: int
    threshold: float
    cer_vector: tuple[tuple[int, float], ...]
    config: PipelineConfig
    degenerate_blocks: tuple[int, ...] = ()
    orientation: ScoreOrientation = ScoreOrientation.NEG_CONDITIONAL_ENTROPY

    def __post_init__(self):
        cer = tuple((int(b), float(r)) for b, r in self.cer_vector)
        object.__setattr__(self, "cer_vector", cer)
        object.__setattr__(self, "degenerate_blocks", tuple(int(b) for b in self.degenerate_blocks))
        object.__setattr__(self, "orientation", ScoreOrientation(self.orientation))
        by_block = dict(cer)
        if self.selected_block not in by_block:
            raise ValidationError("selected_block missing from cer_vector")
        for b, r in cer:
            if not (0.0 <= r <= 1.0):
                raise ValidationError(f"CER for block {b} outside [0, 1]: {r}")
        if by_block[self.selected_block] < max(by_block.values()):
            raise ValidationError("selected_block does not carry the maximal CER")

    def to_obj(self) -> dict:
        return {
            "format": PROFILE_FORMAT,
            "version": PROFILE_VERSION,
            "selected_block": self.selected_block,
            "threshold": self.threshold,
            "cer_vector": [[b, r] for b, r in self.cer_vector],
            "degenerate_blocks": list(self.degenerate_blocks),
            "orientation": self.orientation.value,
            "config": self.config.to_obj(),
            "config_fingerprint": self.config.fingerprint(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_obj(cls, obj: dict) -> "CalibrationProfile":
        if obj.get("format") != PROFILE_FORMAT or obj.get("version") != PROFILE_VERSION:
            raise ValidationError("not a recognized calibration profile document")
        config = PipelineConfig.from_obj(obj["config"])
        if obj.get("config_fingerprint") != config.fingerprint():
            raise ValidationError("profile config fingerprint mismatch")
        return cls(
            selected_block=int(obj["selected_block"]),
            threshold=float(obj["threshold"]),
            cer_vector=tuple((int(b), float(r)) for b, r in obj["cer_vector"]),
            config=config,
            degenerate_blocks=tuple(int(b) for b in obj.get("degenerate_blocks", [])),
            orientation=ScoreOrientation(obj.get("orientation", "neg_conditional_entropy")),
        )

    @classmethod
    def from_json(cls, text: str) -> "CalibrationProfile":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"profile is not valid JSON: {exc}") from exc
        return cls.from_obj(obj)


@dataclass(frozen=True)
class ScoreReport:
    """Per-sample score plus the thresholded decision."""

    sample_id: str
    eood_score: float
    decision: str  # "ID" or "OOD"
    msp_score: Optional[float] = None
    energy_score: Optional[float] = None

    def __post_init__(self):
        if self.decision not in ("ID", "OOD"):
            raise ValidationError(f"decision must be 'ID' or 'OOD', got {self.decision!r}")

    def to_obj(self) -> dict:
        obj = {
            "sample_id": self.sample_id,
            "eood_score": self.eood_score,
            "decision": self.decision,
        }
        if self.msp_score is not None:
            obj["msp_score"] = self.msp_score
        if self.energy_score is not None:
            obj["energy_score"] = self.energy_score
        return obj

    def to_json_line(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_obj(cls, obj: dict) -> "ScoreReport":
        try:
            return cls(
                sample_id=obj["sample_id"],
                eood_score=float(obj["eood_score"]),
                decision=obj["decision"],
                msp_score=obj.get("msp_score"),
                energy_score=obj.get("energy_score"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad score record: {exc}") from exc
