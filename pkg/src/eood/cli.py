"""Command-line interface.

Exit codes: 0 success, 2 validation/usage errors, 1 runtime and I/O
errors. Results go to stdout, error messages to stderr. Every command is
deterministic given identical inputs, flags, and seed.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from .errors import EoodError, ValidationError
from .ingest import Manifest, load_manifest, read_dump, save_manifest, write_dump
from .jigsaw import Image, jigsaw
from .metrics import EvalSummary, ScoreSets, auroc, fpr_at_tpr
from .scoring import (
    decide,
    energy_score,
    eood_score,
    msp_score,
    read_score_file,
    write_score_file,
)
from .selection import calibrate
from .experiments import ablate_blocks, run_selftest
from .types import (
    CalibrationProfile,
    PipelineConfig,
    SampleRecord,
    ScoreReport,
    Split,
    pseudo_id,
    seeded_rng,
)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            _fail(str(exc), 2)
        except FileNotFoundError as exc:
            # an input named on the command line does not exist: usage error
            _fail(str(exc), 2)
        except (EoodError, OSError) as exc:
            _fail(str(exc), 1)

    return wrapper


def _load_config(config_path, seed) -> PipelineConfig:
    if config_path is None:
        config = PipelineConfig()
    else:
        try:
            obj = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{config_path}: not valid JSON: {exc}") from exc
        config = PipelineConfig.from_obj(obj)
    if seed is not None:
        config = config.with_seed(seed)
    return config


def _default_jobs() -> int:
    return os.cpu_count() or 1


@click.group()
def main():
    """Post-hoc OOD detection over per-block feature-map dumps."""


@main.command("jigsaw")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--grid", default=3, show_default=True, help="Jigsaw grid side g.")
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def cmd_jigsaw(manifest_path, grid, seed, out_dir):
    """Generate pseudo-OOD image dumps (block 0) for each source record."""
    if grid < 1:
        raise ValidationError(f"grid must be >= 1, got {grid}")
    manifest = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    sources = [
        r
        for r in manifest.records
        if r.split is not Split.PSEUDO_OOD and r.dump_path(0) is not None
    ]
    if not sources:
        raise ValidationError("manifest has no records with block-0 image dumps")

    records: list[SampleRecord] = []
    for rec in manifest.records:
        # re-anchor existing refs relative to the output directory
        refs = tuple(
            (b, os.path.relpath(manifest.resolve(p), out)) for b, p in rec.block_refs
        )
        logits = (
            os.path.relpath(manifest.resolve(rec.logits_ref), out)
            if rec.logits_ref
            else None
        )
        records.append(
            SampleRecord(rec.sample_id, rec.split, refs, logits_ref=logits)
        )

    for idx, rec in enumerate(sorted(sources, key=lambda r: r.sample_id)):
        arr = read_dump(manifest.resolve(rec.dump_path(0)))
        image = Image(arr)
        rng = seeded_rng(seed, f"jigsaw/{rec.sample_id}")
        shuffled = jigsaw(image, grid, rng)
        ref = f"jigsaw_{idx:06d}.eood"
        write_dump(shuffled, out / ref)
        records.append(
            SampleRecord(pseudo_id(rec.sample_id), Split.PSEUDO_OOD, ((0, ref),))
        )

    updated = Manifest(
        dataset_name=manifest.dataset_name,
        records=records,
        block_count=manifest.block_count,
        created_with=manifest.created_with,
        root=out,
    )
    save_manifest(updated, out / "manifest.json")
    click.echo(f"wrote {len(sources)} pseudo-OOD dumps and {out / 'manifest.json'}")


@main.command("calibrate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--jobs", default=None, type=int)
@handle_errors
def cmd_calibrate(manifest_path, config_path, seed, out_path, jobs):
    """Select the sensitive block and threshold from id_calib/pseudo_ood dumps."""
    config = _load_config(config_path, seed)
    manifest = load_manifest(manifest_path)
    profile = calibrate(manifest.records, config, manifest.root, jobs=jobs or _default_jobs())
    Path(out_path).write_text(profile.to_json(), encoding="utf-8")
    click.echo(
        f"selected block {profile.selected_block} "
        f"(CER {dict(profile.cer_vector)[profile.selected_block]:.4f}), "
        f"threshold {profile.threshold:.6g}, orientation {profile.orientation.value}"
    )


@main.command("score")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--profile", "profile_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--split", default="all",
              type=click.Choice(["all", "test_id", "test_ood", "id_calib", "pseudo_ood"]))
@click.option("--jobs", default=None, type=int)
@handle_errors
def cmd_score(manifest_path, profile_path, out_path, split, jobs):
    """Score records against a calibration profile (JSON-lines output)."""
    profile = CalibrationProfile.from_json(Path(profile_path).read_text(encoding="utf-8"))
    manifest = load_manifest(manifest_path)
    records = manifest.records if split == "all" else manifest.by_split(Split(split))
    if not records:
        raise ValidationError(f"no records in split {split!r}")

    from concurrent.futures import ThreadPoolExecutor

    def run(rec: SampleRecord) -> ScoreReport:
        score = eood_score(rec, profile, manifest.root)
        msp = energy = None
        if rec.logits_ref is not None:
            logits = read_dump(manifest.resolve(rec.logits_ref))
            msp = msp_score(logits)
            energy = energy_score(logits)
        return ScoreReport(rec.sample_id, score, decide(score, profile), msp, energy)

    n_jobs = jobs or _default_jobs()
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            reports = list(pool.map(run, records))
    else:
        reports = [run(r) for r in records]
    write_score_file(out_path, reports, profile.config.fingerprint(), profile.config.tpr_target)
    click.echo(f"scored {len(reports)} records -> {out_path}")


@main.command("eval")
@click.option("--id-scores", "id_path", required=True, type=click.Path())
@click.option("--ood-scores", "ood_specs", multiple=True, required=True,
              help="NAME=PATH, repeatable: one score file per OOD dataset.")
@click.option("--out", "out_path", default=None, type=click.Path())
@handle_errors
def cmd_eval(id_path, ood_specs, out_path):
    """FPR at the target TPR plus AUROC per OOD set, with an Average row."""
    id_header, id_reports = read_score_file(id_path)
    tpr_target = float(id_header.get("tpr_target", 0.95))

    def methods_of(reports):
        methods = ["eood"]
        if all(r.msp_score is not None for r in reports):
            methods.append("msp")
        if all(r.energy_score is not None for r in reports):
            methods.append("energy")
        return methods

    def score_column(reports, method):
        if method == "eood":
            return [r.eood_score for r in reports]
        if method == "msp":
            return [r.msp_score for r in reports]
        return [r.energy_score for r in reports]

    ood_sets = []
    for spec in ood_specs:
        if "=" not in spec:
            raise ValidationError(f"--ood-scores expects NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        header, reports = read_score_file(path)
        if header.get("config_fingerprint") != id_header.get("config_fingerprint"):
            raise ValidationError(
                f"{path}: config fingerprint differs from {id_path}; "
                "refusing to mix scores from different profiles"
            )
        ood_sets.append((name, reports))

    methods = methods_of(id_reports)
    for _, reports in ood_sets:
        methods = [m for m in methods if m in methods_of(reports)]

    summary = EvalSummary(tpr_target=tpr_target, methods=methods,
                          ood_names=[name for name, _ in ood_sets])
    import numpy as np

    for name, reports in ood_sets:
        summary.rows[name] = {}
        for method in methods:
            sets = ScoreSets(
                np.array(score_column(id_reports, method)),
                np.array(score_column(reports, method)),
            )
            summary.rows[name][method] = {
                "fpr": fpr_at_tpr(sets, tpr_target),
                "auroc": auroc(sets),
            }

    click.echo(summary.to_table(), nl=False)
    if out_path:
        Path(out_path).write_text(summary.to_json(), encoding="utf-8")


@main.command("ablate-blocks")
@click.option("--manifest", "manifest_paths", multiple=True, required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--jobs", default=None, type=int)
@handle_errors
def cmd_ablate_blocks(manifest_paths, config_path, seed, out_path, jobs):
    """Per-block CER and test metrics; pass several manifests to sweep grids."""
    config = _load_config(config_path, seed)
    reports = []
    for path in manifest_paths:
        manifest = load_manifest(path)
        if not manifest.records:
            raise ValidationError(f"{path}: manifest has no records")
        reports.append(ablate_blocks(manifest, config, jobs=jobs or _default_jobs()))
    for report in reports:
        click.echo(report.to_table(), nl=False)
    if out_path:
        payload = {"format": "eood-ablation", "version": 1,
                   "reports": [r.to_obj() for r in reports]}
        Path(out_path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                                  encoding="utf-8")


@main.command("selftest")
@click.option("--seed", default=0, type=int)
@handle_errors
def cmd_selftest(seed):
    """Run the estimator sanity battery (analytic Gaussian/uniform oracles)."""
    checks = run_selftest(seed=seed)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        click.echo(f"{status}  {check.name}: {check.detail}")
        failed += 0 if check.passed else 1
    if failed:
        _fail(f"{failed} selftest check(s) failed", 1)


if __name__ == "__main__":
    main()
