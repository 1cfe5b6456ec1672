"""Record-level glue: read dumps, align block pairs, estimate entropies.

One code path computes the per-(sample, block) conditional entropy for
calibration, scoring, and ablation, so the jitter streams (labeled by
sample id and block) reproduce bit-identical values everywhere.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .entropy import conditional_entropy
from .errors import FormatError, IngestError, ValidationError
from .features import align_pair
from .ingest import DEFAULT_MAX_BYTES, read_dump
from .types import FeatureMap, PipelineConfig, SampleRecord, seeded_rng


class MissingDumpError(IngestError, ValidationError):
    """A record promises a dump that is absent on disk or in its refs."""


def load_block_map(root: Path, record: SampleRecord, block_index: int,
                   max_bytes: int = DEFAULT_MAX_BYTES) -> FeatureMap:
    ref = record.dump_path(block_index)
    if ref is None:
        raise MissingDumpError(f"record {record.sample_id!r} has no dump for block {block_index}")
    path = Path(root) / ref
    try:
        arr = read_dump(path, max_bytes=max_bytes)
    except FileNotFoundError as exc:
        raise MissingDumpError(f"record {record.sample_id!r}: {path} does not exist") from exc
    if arr.ndim != 3:
        raise FormatError(f"{path}: expected a 3-D feature dump, got ndim={arr.ndim}")
    return FeatureMap(block_index=block_index, data=arr)


def jitter_stream(config: PipelineConfig, sample_id: str, block_index: int) -> np.random.Generator:
    return seeded_rng(config.rng_seed, f"jitter/{sample_id}/block{block_index}")


def sample_conditional_entropy(root: Path, record: SampleRecord, block_index: int,
                               config: PipelineConfig) -> float:
    """f_ce(x, l) = H(block l-1 | block l) for one record, from its dumps."""
    if block_index < 2:
        raise ValidationError(f"block {block_index} has no predecessor feature block")
    prev_map = load_block_map(root, record, block_index - 1)
    cur_map = load_block_map(root, record, block_index)
    pair = align_pair(prev_map, cur_map, config)
    rng = jitter_stream(config, record.sample_id, block_index)
    return conditional_entropy(pair.prev, pair.cur, config.k_neighbors, config.jitter_scale, rng)
