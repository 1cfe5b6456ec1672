"""Final score computation, the threshold rule, and MSP/Energy baselines."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ValidationError
from .pipeline import sample_conditional_entropy
from .selection import orient
from .types import CalibrationProfile, SampleRecord, ScoreReport


@dataclass(frozen=True)
class LogitsVector:
    """Classifier output logits, length K >= 2, finite."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).ravel()
        if arr.size < 2:
            raise DomainError("LogitsVector needs at least 2 classes")
        if not np.all(np.isfinite(arr)):
            raise DomainError("logits contain non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def _logit_array(logits, min_size: int) -> np.ndarray:
    arr = logits.values if isinstance(logits, LogitsVector) else np.asarray(logits, dtype=np.float64).ravel()
    if arr.size < min_size:
        raise DomainError(f"need at least {min_size} logits, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("logits contain non-finite values")
    return arr


def eood_score(record: SampleRecord, profile: CalibrationProfile, base_dir) -> float:
    """Oriented conditional entropy at the profile's selected block.

    Larger means more ID-like under the profile's stored orientation.
    """
    ce = sample_conditional_entropy(
        Path(base_dir), record, profile.selected_block, profile.config
    )
    return orient(ce, profile.orientation)


def decide(score: float, profile: CalibrationProfile) -> str:
    """Threshold rule: ID iff score >= gamma."""
    return "ID" if score >= profile.threshold else "OOD"


def msp_score(logits) -> float:
    """Maximum softmax probability, computed with max-subtraction."""
    arr = _logit_array(logits, min_size=2)
    shifted = arr - arr.max()
    e = np.exp(shifted)
    return float(e.max() / e.sum())


def energy_score(logits, temperature: float = 1.0) -> float:
    """Negative free energy T * log sum exp(logit / T); larger = more ID-like."""
    if not (temperature > 0):
        raise DomainError("temperature must be > 0")
    arr = _logit_array(logits, min_size=1) / temperature
    m = arr.max()
    return float(temperature * (m + np.log(np.exp(arr - m).sum())))


SCORES_FORMAT = "eood-scores"
SCORES_VERSION = 1


def write_score_file(path, reports: list[ScoreReport], config_fingerprint: str,
                     tpr_target: float) -> None:
    """JSON-lines score file: one header line, then one record per sample,
    sorted by sample_id so reruns are byte-identical."""
    header = {
        "format": SCORES_FORMAT,
        "version": SCORES_VERSION,
        "config_fingerprint": config_fingerprint,
        "tpr_target": tpr_target,
    }
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            for report in sorted(reports, key=lambda r: r.sample_id):
                fh.write(report.to_json_line() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_score_file(path) -> tuple[dict, list[ScoreReport]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty score file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: bad header line: {exc}") from exc
    if header.get("format") != SCORES_FORMAT or header.get("version") != SCORES_VERSION:
        raise ValidationError(f"{path}: not a recognized score file")
    reports = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            reports.append(ScoreReport.from_obj(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{i}: bad score line: {exc}") from exc
    if not reports:
        raise ValidationError(f"{path}: no score records")
    return header, reports
