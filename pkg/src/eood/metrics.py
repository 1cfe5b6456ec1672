"""Threshold-free and threshold-at-TPR evaluation of score sets.

Scores are oriented so that larger means more ID-like. AUROC follows the
Mann-Whitney convention (ties credited 0.5) via average ranks, matching
the O(n*m) pairwise count exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import DomainError


@dataclass(frozen=True)
class ScoreSets:
    """ID and OOD score samples; orientation: larger = ID."""

    id_scores: np.ndarray
    ood_scores: np.ndarray

    def __post_init__(self):
        for name in ("id_scores", "ood_scores"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if arr.size < 1:
                raise DomainError(f"{name} must be non-empty")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def auroc(sets: ScoreSets) -> float:
    """P(random ID score > random OOD score), ties at half credit."""
    n, m = sets.id_scores.size, sets.ood_scores.size
    combined = np.concatenate([sets.id_scores, sets.ood_scores])
    ranks = rankdata(combined, method="average")
    u = float(np.sum(ranks[:n])) - n * (n + 1) / 2.0
    return u / (n * m)


def threshold_at_tpr(id_scores: np.ndarray, tpr_target: float) -> float:
    """Largest gamma keeping at least ceil(tpr_target * n) ID scores >= gamma."""
    if not (0.0 < tpr_target < 1.0):
        raise DomainError("tpr_target must lie strictly between 0 and 1")
    scores = np.asarray(id_scores, dtype=np.float64).ravel()
    if scores.size < 1:
        raise DomainError("id_scores must be non-empty")
    need = math.ceil(tpr_target * scores.size)
    # the need-th largest score is the largest threshold with TPR >= target
    return float(np.sort(scores)[::-1][need - 1])


def fpr_at_tpr(sets: ScoreSets, tpr_target: float) -> float:
    """FPR on OOD at the threshold where ID TPR first reaches tpr_target."""
    gamma = threshold_at_tpr(sets.id_scores, tpr_target)
    return float(np.mean(sets.ood_scores >= gamma))


SCORES_FORMAT = "eood-scores"
SCORES_VERSION = 1
SUMMARY_FORMAT = "eood-eval"
SUMMARY_VERSION = 1


@dataclass
class EvalSummary:
    """FPR@TPR and AUROC per (method, OOD dataset) pair, plus the average row.

    rows: {ood_name: {method: {"fpr": float, "auroc": float}}}
    """

    tpr_target: float
    methods: list[str]
    ood_names: list[str]
    rows: dict = field(default_factory=dict)

    def average(self) -> dict:
        avg: dict[str, dict[str, float]] = {}
        for method in self.methods:
            cells = [self.rows[name][method] for name in self.ood_names if method in self.rows[name]]
            if cells:
                avg[method] = {
                    "fpr": sum(c["fpr"] for c in cells) / len(cells),
                    "auroc": sum(c["auroc"] for c in cells) / len(cells),
                }
        return avg

    def to_obj(self) -> dict:
        return {
            "format": SUMMARY_FORMAT,
            "version": SUMMARY_VERSION,
            "tpr_target": self.tpr_target,
            "methods": self.methods,
            "ood_names": self.ood_names,
            "rows": self.rows,
            "average": self.average(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        """Aligned text table, metrics as percentages with two decimals."""
        fpr_label = f"FPR{round(self.tpr_target * 100)}"
        header = ["OOD dataset"]
        for method in self.methods:
            header += [f"{method} {fpr_label}", f"{method} AUROC"]
        body = []
        for name in self.ood_names + ["Average"]:
            cells = self.average() if name == "Average" else self.rows[name]
            line = [name]
            for method in self.methods:
                if method in cells:
                    line += [f"{cells[method]['fpr'] * 100:.2f}", f"{cells[method]['auroc'] * 100:.2f}"]
                else:
                    line += ["-", "-"]
            body.append(line)
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [fmt.format(*header), fmt.format(*["-" * w for w in widths])]
        lines += [fmt.format(*row) for row in body]
        return "\n".join(lines) + "\n"
