"""Turn per-block feature maps into aligned sample matrices.

Spatial positions are the samples and channels are the dimensions; a
mismatched pair of blocks is average-pooled to the coarser of the two
grids, and wide channel counts are capped by a seeded signed random
projection that is identical for every sample of a given block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import SampleMatrix
from .errors import DomainError
from .types import FeatureMap, PipelineConfig, seeded_rng


@dataclass(frozen=True)
class AlignedPair:
    """Operands for one conditional-entropy evaluation at block `block_index`."""

    prev: SampleMatrix
    cur: SampleMatrix
    block_index: int
    grid_h: int
    grid_w: int


def _cell_edges(source: int, target: int) -> np.ndarray:
    # partition as evenly as possible, larger cells first: 3 -> 2 gives {0,1},{2}
    return np.array([math.ceil(i * source / target) for i in range(target + 1)], dtype=np.int64)


def pool_to_grid(fmap: FeatureMap, target_h: int, target_w: int) -> FeatureMap:
    """Average-pool to (target_h, target_w) over contiguous cells."""
    if target_h < 1 or target_w < 1:
        raise DomainError("pool targets must be >= 1")
    if target_h > fmap.height or target_w > fmap.width:
        raise DomainError(
            f"pool target {target_h}x{target_w} exceeds source {fmap.height}x{fmap.width}"
        )
    if target_h == fmap.height and target_w == fmap.width:
        return fmap
    data = fmap.data.astype(np.float64)
    row_edges = _cell_edges(fmap.height, target_h)
    col_edges = _cell_edges(fmap.width, target_w)
    out = np.empty((fmap.channels, target_h, target_w), dtype=np.float64)
    for i in range(target_h):
        rows = data[:, row_edges[i] : row_edges[i + 1], :]
        for j in range(target_w):
            out[:, i, j] = rows[:, :, col_edges[j] : col_edges[j + 1]].mean(axis=(1, 2))
    return FeatureMap(block_index=fmap.block_index, data=out)


def projection_matrix(channels: int, channel_cap: int, rng: np.random.Generator) -> np.ndarray:
    """Signed random projection, entries +-1/sqrt(channel_cap)."""
    signs = rng.integers(0, 2, size=(channels, channel_cap)).astype(np.float64) * 2.0 - 1.0
    return signs / math.sqrt(channel_cap)


def to_sample_matrix(fmap: FeatureMap, channel_cap: int, rng: np.random.Generator) -> SampleMatrix:
    """One sample per spatial position; channel vector as coordinates.

    Channel counts above channel_cap are reduced with projection_matrix;
    the caller must supply a stream keyed by (seed, block_index) so every
    sample of a block sees the same projection.
    """
    if channel_cap < 1:
        raise DomainError("channel_cap must be >= 1")
    x = fmap.data.reshape(fmap.channels, -1).T.astype(np.float64)  # (h*w, channels)
    if fmap.channels > channel_cap:
        x = x @ projection_matrix(fmap.channels, channel_cap, rng)
    return SampleMatrix(x)


def _projection_stream(config: PipelineConfig, block_index: int) -> np.random.Generator:
    return seeded_rng(config.rng_seed, f"projection/block{block_index}")


def align_pair(prev_map: FeatureMap, cur_map: FeatureMap, config: PipelineConfig) -> AlignedPair:
    """Pool both maps to the coarser common grid and convert to matrices.

    Row i of prev and row i of cur refer to the same spatial position.
    Projection streams are derived from (config.rng_seed, block index), so
    the reduction is deterministic per block across samples and runs.
    """
    gh = min(prev_map.height, cur_map.height)
    gw = min(prev_map.width, cur_map.width)
    prev_pooled = pool_to_grid(prev_map, gh, gw)
    cur_pooled = pool_to_grid(cur_map, gh, gw)
    prev = to_sample_matrix(prev_pooled, config.channel_cap, _projection_stream(config, prev_map.block_index))
    cur = to_sample_matrix(cur_pooled, config.channel_cap, _projection_stream(config, cur_map.block_index))
    return AlignedPair(prev=prev, cur=cur, block_index=cur_map.block_index, grid_h=gh, grid_w=gw)
