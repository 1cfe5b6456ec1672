"""Estimator self-tests and per-block ablation studies.

These back the `selftest` and `ablate-blocks` CLI commands but are plain
functions so tests can drive them directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import entropy
from .errors import InsufficientSamplesError, ValidationError
from .ingest import Manifest
from .metrics import ScoreSets, auroc, fpr_at_tpr
from .pipeline import sample_conditional_entropy
from .selection import CePair, block_cer, orient, paired_calibration_records
from .types import PipelineConfig, ScoreOrientation, Split, seeded_rng


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _gaussian_check(dim: int, n: int, seeds: list[int], tol: float) -> CheckResult:
    expected = 0.5 * math.log((2 * math.pi * math.e) ** dim)
    estimates = []
    for seed in seeds:
        rng = seeded_rng(seed, f"selftest/gauss{dim}d")
        x = rng.standard_normal((n, dim))
        estimates.append(entropy.knn_entropy(x, k=3, jitter_scale=1e-10, rng=rng))
    got = float(np.mean(estimates))
    ok = abs(got - expected) <= tol
    return CheckResult(
        name=f"gaussian-entropy-{dim}d",
        passed=ok,
        detail=f"{got:.4f} vs {expected:.4f} (tol {tol})",
    )


def _uniform_check(n: int, seeds: list[int], tol: float) -> CheckResult:
    estimates = []
    for seed in seeds:
        rng = seeded_rng(seed, "selftest/uniform")
        x = rng.uniform(0.0, 1.0, size=(n, 1))
        estimates.append(entropy.knn_entropy(x, k=3, jitter_scale=1e-10, rng=rng))
    got = float(np.mean(estimates))
    ok = abs(got) <= tol
    return CheckResult("uniform-entropy-1d", ok, f"{got:.4f} vs 0.0 (tol {tol})")


def _chain_rule_check(seed: int, instances: int = 10) -> CheckResult:
    worst = 0.0
    rng = seeded_rng(seed, "selftest/chain-data")
    for i in range(instances):
        n = int(rng.integers(50, 200))
        da = int(rng.integers(1, 4))
        db = int(rng.integers(1, 4))
        a = rng.standard_normal((n, da))
        b = rng.standard_normal((n, db))
        label = f"selftest/chain-jitter/{i}"
        kwargs = dict(k=3, jitter_scale=1e-6)
        cond = entropy.conditional_entropy(a, b, rng=seeded_rng(seed, label), **kwargs)
        marg = entropy.knn_entropy(b, rng=seeded_rng(seed, label), **kwargs)
        joint = entropy.joint_entropy(a, b, rng=seeded_rng(seed, label), **kwargs)
        worst = max(worst, abs(cond + marg - joint))
    return CheckResult("chain-rule-exactness", worst <= 1e-12, f"worst residual {worst:.3e}")


def _correlated_check(seed: int, n: int = 3000, rho: float = 0.9, tol: float = 0.1) -> CheckResult:
    expected = 0.5 * math.log(2 * math.pi * math.e * (1 - rho**2))
    rng = seeded_rng(seed, "selftest/corr")
    y = rng.standard_normal((n, 1))
    x = rho * y + math.sqrt(1 - rho**2) * rng.standard_normal((n, 1))
    got = entropy.conditional_entropy(x, y, k=3, jitter_scale=1e-10, rng=rng)
    ok = abs(got - expected) <= tol
    return CheckResult("conditional-entropy-rho0.9", ok, f"{got:.4f} vs {expected:.4f} (tol {tol})")


def _digamma_check() -> CheckResult:
    # psi(1) = -euler_gamma, psi(2) = 1 - euler_gamma
    euler_gamma = 0.5772156649015329
    cases = [(1.0, -euler_gamma), (2.0, 1.0 - euler_gamma), (10.5, 2.3030010342976865)]
    worst = max(abs(entropy.digamma(x) - want) for x, want in cases)
    return CheckResult("digamma-reference-points", worst <= 1e-10, f"worst error {worst:.3e}")


def run_selftest(seed: int = 0, n: int = 4000, n_seeds: int = 5) -> list[CheckResult]:
    """Estimator sanity battery; every check must pass on a healthy build."""
    seeds = [seed + i for i in range(n_seeds)]
    checks = [_digamma_check()]
    for dim in (1, 2, 3):
        checks.append(_gaussian_check(dim, n, seeds, tol=0.05))
    checks.append(_uniform_check(n, seeds, tol=0.05))
    checks.append(_chain_rule_check(seed))
    checks.append(_correlated_check(seed))
    return checks


@dataclass
class BlockAblation:
    """Per-block calibration signal and test metrics for one manifest."""

    dataset_name: str
    grid: int
    blocks: list[int]
    cer: dict[int, float]
    fpr: dict[int, float]
    auroc: dict[int, float]
    tpr_target: float

    def to_obj(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "grid": self.grid,
            "blocks": self.blocks,
            "cer": {str(b): v for b, v in self.cer.items()},
            "fpr": {str(b): v for b, v in self.fpr.items()},
            "auroc": {str(b): v for b, v in self.auroc.items()},
            "tpr_target": self.tpr_target,
        }

    def to_table(self) -> str:
        fpr_label = f"FPR{round(self.tpr_target * 100)}"
        header = ["block", "CER", fpr_label, "AUROC"]
        body = []
        for b in self.blocks:
            row = [str(b), f"{self.cer[b]:.4f}" if b in self.cer else "-"]
            row.append(f"{self.fpr[b] * 100:.2f}" if b in self.fpr else "-")
            row.append(f"{self.auroc[b] * 100:.2f}" if b in self.auroc else "-")
            body.append(row)
        widths = [max(len(r[i]) for r in [header] + body) for i in range(4)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [f"# {self.dataset_name} (jigsaw grid {self.grid})", fmt.format(*header)]
        lines += [fmt.format(*row) for row in body]
        return "\n".join(lines) + "\n"


def ablate_blocks(manifest: Manifest, config: PipelineConfig, jobs: int = 1) -> BlockAblation:
    """CER and (when test splits exist) FPR/AUROC for every candidate block."""
    pairs = paired_calibration_records(manifest.records, config)
    blocks = sorted(
        b
        for b in set(pairs[0][0].feature_blocks())
        if b - 1 in set(pairs[0][0].feature_blocks())
    )
    if not blocks:
        raise ValidationError("manifest has no block with a predecessor")
    test_id = manifest.by_split(Split.TEST_ID)
    test_ood = manifest.by_split(Split.TEST_OOD)

    tasks = []
    for rec, mate in pairs:
        for b in blocks:
            tasks.append(("calib_id", rec, b))
            tasks.append(("calib_pood", mate, b))
    for rec in test_id:
        for b in blocks:
            tasks.append(("test_id", rec, b))
    for rec in test_ood:
        for b in blocks:
            tasks.append(("test_ood", rec, b))

    def run(task):
        kind, rec, b = task
        try:
            value = sample_conditional_entropy(manifest.root, rec, b, config)
        except InsufficientSamplesError:
            value = None
        return kind, rec.sample_id, b, value

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    by_kind: dict[tuple[str, int], dict[str, float]] = {}
    dead: set[int] = set()
    for kind, sid, b, value in results:
        if value is None:
            dead.add(b)
        else:
            by_kind.setdefault((kind, b), {})[sid] = value

    cer: dict[int, float] = {}
    fpr: dict[int, float] = {}
    auc: dict[int, float] = {}
    for b in blocks:
        if b in dead:
            cer[b] = 0.0
            continue
        ce_id = by_kind.get(("calib_id", b), {})
        ce_pood = by_kind.get(("calib_pood", b), {})
        block_pairs = [
            CePair(i, ce_id[rec.sample_id], ce_pood[mate.sample_id])
            for i, (rec, mate) in enumerate(pairs)
        ]
        cer[b] = block_cer(block_pairs)
        if not test_id or not test_ood:
            continue
        # per-block empirical orientation, same rule calibrate uses
        orientation = config.score_orientation
        mean_id = float(np.mean([v for v in ce_id.values()]))
        mean_pood = float(np.mean([v for v in ce_pood.values()]))
        if orient(mean_id, orientation) < orient(mean_pood, orientation):
            orientation = (
                ScoreOrientation.POS_CONDITIONAL_ENTROPY
                if orientation is ScoreOrientation.NEG_CONDITIONAL_ENTROPY
                else ScoreOrientation.NEG_CONDITIONAL_ENTROPY
            )
        id_scores = [orient(v, orientation) for v in by_kind.get(("test_id", b), {}).values()]
        ood_scores = [orient(v, orientation) for v in by_kind.get(("test_ood", b), {}).values()]
        if id_scores and ood_scores:
            sets = ScoreSets(np.array(id_scores), np.array(ood_scores))
            fpr[b] = fpr_at_tpr(sets, config.tpr_target)
            auc[b] = auroc(sets)

    return BlockAblation(
        dataset_name=manifest.dataset_name,
        grid=config.grid,
        blocks=blocks,
        cer=cer,
        fpr=fpr,
        auroc=auc,
        tpr_target=config.tpr_target,
    )
