"""Sensitive-block selection from paired ID / pseudo-OOD conditional entropies.

For each block l the Conditional Entropy Ratio is

    R(l) = mean_i |ce_id_i - ce_pood_i| / max_i |ce_id_i - ce_pood_i|

over calibration pairs (x_i, jigsaw(x_i)); the block with maximal R is
the most sensitive to the ID/OOD information-flow difference and is the
one used for scoring.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InsufficientSamplesError, NoSignalError, ValidationError
from .metrics import threshold_at_tpr
from .pipeline import MissingDumpError, sample_conditional_entropy
from .types import (
    CalibrationProfile,
    PipelineConfig,
    SampleRecord,
    ScoreOrientation,
    Split,
    pseudo_id,
    seeded_rng,
)


@dataclass(frozen=True)
class CePair:
    """Conditional entropies of one calibration sample and its jigsaw twin."""

    sample_index: int
    ce_id: float
    ce_pood: float

    def __post_init__(self):
        if not (np.isfinite(self.ce_id) and np.isfinite(self.ce_pood)):
            raise DomainError("CePair values must be finite")


def block_cer(pairs: list[CePair]) -> float:
    """Eq-style ratio mean(d)/max(d) with d_i = |ce_id - ce_pood|.

    Returns 0.0 when every difference is zero; such a block is degenerate
    (it carries no selection signal).
    """
    if not pairs:
        raise DomainError("block_cer needs at least one pair")
    d = np.array([abs(p.ce_id - p.ce_pood) for p in pairs], dtype=np.float64)
    dmax = float(d.max())
    if dmax == 0.0:
        return 0.0
    return float(d.mean()) / dmax


def select_block(cer_vector: list[tuple[int, float]]) -> int:
    """Block index with maximal CER; ties go to the smallest index."""
    if not cer_vector:
        raise DomainError("empty CER vector")
    best_block, best_r = None, 0.0
    for block, r in sorted(cer_vector):
        if r > best_r:
            best_block, best_r = block, r
    if best_block is None:
        raise NoSignalError("every block is degenerate (CER = 0 everywhere)")
    return best_block


def orient(ce: float, orientation: ScoreOrientation) -> float:
    if orientation is ScoreOrientation.NEG_CONDITIONAL_ENTROPY:
        return -ce
    return ce


def _candidate_blocks(records: list[SampleRecord]) -> list[int]:
    blocks = set(records[0].feature_blocks())
    for rec in records[1:]:
        blocks &= set(rec.feature_blocks())
    return sorted(b for b in blocks if b - 1 in blocks)


def paired_calibration_records(
    records: list[SampleRecord], config: PipelineConfig
) -> list[tuple[SampleRecord, SampleRecord]]:
    """Match id_calib records to their jigsaw twins, applying the sample cap."""
    id_records = sorted(
        (r for r in records if r.split is Split.ID_CALIB), key=lambda r: r.sample_id
    )
    if not id_records:
        raise ValidationError("no id_calib records to calibrate on")
    pseudo = {r.sample_id: r for r in records if r.split is Split.PSEUDO_OOD}
    pairs = []
    for rec in id_records:
        mate = pseudo.get(pseudo_id(rec.sample_id))
        if mate is None:
            raise MissingDumpError(
                f"record {rec.sample_id!r} has no pseudo-OOD counterpart "
                f"{pseudo_id(rec.sample_id)!r}"
            )
        pairs.append((rec, mate))
    if len(pairs) > config.calib_sample_cap:
        rng = seeded_rng(config.rng_seed, "calib-subsample")
        keep = rng.choice(len(pairs), size=config.calib_sample_cap, replace=False)
        pairs = [pairs[i] for i in sorted(keep)]
    return pairs


def calibrate(records: list[SampleRecord], config: PipelineConfig, base_dir,
              jobs: int = 1) -> CalibrationProfile:
    """Full calibration: per-block CER, block choice, orientation, threshold.

    Blocks whose aligned pairs are too small for the k-NN estimator are
    marked degenerate rather than aborting the run.
    """
    root = Path(base_dir)
    pairs = paired_calibration_records(records, config)
    candidates = _candidate_blocks([r for pair in pairs for r in pair])
    if not candidates:
        raise NoSignalError("no block with a predecessor; need feature blocks l >= 2")

    tasks = []
    for rec, mate in pairs:
        for block in candidates:
            tasks.append((rec, block))
            tasks.append((mate, block))

    ce: dict[tuple[str, int], float] = {}
    dead_blocks: set[int] = set()

    def run(task):
        rec, block = task
        try:
            return (rec.sample_id, block), sample_conditional_entropy(root, rec, block, config)
        except InsufficientSamplesError:
            return (rec.sample_id, block), None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    for key, value in results:
        if value is None:
            dead_blocks.add(key[1])
        else:
            ce[key] = value

    cer_vector: list[tuple[int, float]] = []
    degenerate: list[int] = []
    per_block_pairs: dict[int, list[CePair]] = {}
    for block in candidates:
        if block in dead_blocks:
            cer_vector.append((block, 0.0))
            degenerate.append(block)
            continue
        block_pairs = [
            CePair(i, ce[(rec.sample_id, block)], ce[(mate.sample_id, block)])
            for i, (rec, mate) in enumerate(pairs)
        ]
        per_block_pairs[block] = block_pairs
        r = block_cer(block_pairs)
        cer_vector.append((block, r))
        if r == 0.0:
            degenerate.append(block)

    selected = select_block(cer_vector)

    ce_id = np.array([p.ce_id for p in per_block_pairs[selected]])
    ce_pood = np.array([p.ce_pood for p in per_block_pairs[selected]])
    orientation = config.score_orientation
    if np.mean(orient(ce_id, orientation)) < np.mean(orient(ce_pood, orientation)):
        orientation = (
            ScoreOrientation.POS_CONDITIONAL_ENTROPY
            if orientation is ScoreOrientation.NEG_CONDITIONAL_ENTROPY
            else ScoreOrientation.NEG_CONDITIONAL_ENTROPY
        )
    id_scores = np.array([orient(v, orientation) for v in ce_id])
    gamma = threshold_at_tpr(id_scores, config.tpr_target)

    return CalibrationProfile(
        selected_block=selected,
        threshold=gamma,
        cer_vector=tuple(cer_vector),
        config=config,
        degenerate_blocks=tuple(degenerate),
        orientation=orientation,
    )
