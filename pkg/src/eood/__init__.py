"""Post-hoc OOD detection from per-block feature-map dumps.

The engine selects the network block whose conditional entropy reacts
most strongly to jigsaw-shuffled inputs, then scores test samples by the
conditional entropy at that block.
"""

from .entropy import SampleMatrix, conditional_entropy, digamma, joint_entropy, knn_entropy
from .features import AlignedPair, align_pair, pool_to_grid, projection_matrix, to_sample_matrix
from .ingest import Manifest, load_manifest, read_dump, save_manifest, write_dump
from .jigsaw import Image, apply_tile_permutation, generate_pseudo_set, inverse_permutation, jigsaw
from .metrics import EvalSummary, ScoreSets, auroc, fpr_at_tpr, threshold_at_tpr
from .scoring import (
    LogitsVector,
    decide,
    energy_score,
    eood_score,
    msp_score,
    read_score_file,
    write_score_file,
)
from .selection import CePair, block_cer, calibrate, select_block
from .types import (
    CalibrationProfile,
    FeatureMap,
    PipelineConfig,
    SampleRecord,
    ScoreOrientation,
    ScoreReport,
    Split,
    pseudo_id,
    seeded_rng,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedPair",
    "CalibrationProfile",
    "CePair",
    "EvalSummary",
    "FeatureMap",
    "Image",
    "LogitsVector",
    "Manifest",
    "PipelineConfig",
    "SampleMatrix",
    "SampleRecord",
    "ScoreOrientation",
    "ScoreReport",
    "ScoreSets",
    "Split",
    "align_pair",
    "apply_tile_permutation",
    "auroc",
    "block_cer",
    "calibrate",
    "conditional_entropy",
    "decide",
    "digamma",
    "energy_score",
    "eood_score",
    "fpr_at_tpr",
    "generate_pseudo_set",
    "inverse_permutation",
    "jigsaw",
    "joint_entropy",
    "knn_entropy",
    "load_manifest",
    "msp_score",
    "pool_to_grid",
    "projection_matrix",
    "pseudo_id",
    "read_dump",
    "read_score_file",
    "save_manifest",
    "select_block",
    "seeded_rng",
    "threshold_at_tpr",
    "to_sample_matrix",
    "write_dump",
    "write_score_file",
]
