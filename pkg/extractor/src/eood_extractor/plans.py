"""Extraction plans: which model, which layer taps, which preprocessing.

A plan's block_taps list the module paths whose outputs form blocks
1..L, in forward execution order. Plans for the four standard
architectures ship as JSON data files next to this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class ExtractionPlan:
    model_name: str
    block_taps: tuple[str, ...]
    input_size: int
    normalization_mean: tuple[float, float, float]
    normalization_std: tuple[float, float, float]
    batch_size: int = 32
    include_logits: bool = False
    model_kwargs: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if not self.block_taps:
            raise ValueError("block_taps must be non-empty")
        if len(set(self.block_taps)) != len(self.block_taps):
            raise ValueError("block_taps must be distinct")
        if self.input_size < 1 or self.batch_size < 1:
            raise ValueError("input_size and batch_size must be >= 1")

    @property
    def block_count(self) -> int:
        return len(self.block_taps)

    def with_overrides(self, **kwargs) -> "ExtractionPlan":
        return replace(self, **kwargs)

    @classmethod
    def from_obj(cls, obj: dict) -> "ExtractionPlan":
        return cls(
            model_name=obj["model"],
            block_taps=tuple(obj["taps"]),
            input_size=int(obj["input_size"]),
            normalization_mean=tuple(obj["mean"]),
            normalization_std=tuple(obj["std"]),
            batch_size=int(obj.get("batch_size", 32)),
            include_logits=bool(obj.get("logits", False)),
            model_kwargs=tuple(sorted(obj.get("model_kwargs", {}).items())),
        )


def builtin_plan_names() -> list[str]:
    files = resources.files("eood_extractor").joinpath("plans")
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_plan(name_or_path: str) -> ExtractionPlan:
    """Load a plan by builtin name (vgg11, wrn28, vgg16, wrn50) or JSON path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return ExtractionPlan.from_obj(json.loads(path.read_text(encoding="utf-8")))
    candidate = resources.files("eood_extractor").joinpath("plans", f"{name_or_path}.json")
    if candidate.is_file():
        return ExtractionPlan.from_obj(json.loads(candidate.read_text(encoding="utf-8")))
    raise ValueError(
        f"unknown plan {name_or_path!r}; builtins: {', '.join(builtin_plan_names())}"
    )
