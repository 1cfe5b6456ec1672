"""Run a model over image folders and dump every block's feature map.

Outputs use the engine's wire formats; the jigsaw variant shells out to
the engine's own `eood jigsaw` command so there is exactly one shuffle
implementation in the system.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image as PILImage

from .models import TapRecorder, build_model
from .plans import ExtractionPlan
from .wire import (
    PSEUDO_SUFFIX,
    load_manifest,
    manifest_obj,
    read_tensor,
    record_obj,
    save_manifest,
    write_tensor,
)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"}


def list_images(image_dir) -> list[Path]:
    image_dir = Path(image_dir)
    return sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_image_tensor(path, input_size: int) -> np.ndarray:
    """Raw [0, 1] RGB tensor (3, input_size, input_size), float32."""
    with PILImage.open(path) as img:
        img = img.convert("RGB").resize((input_size, input_size), PILImage.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def _deterministic_mode():
    torch.use_deterministic_algorithms(True)
    torch.manual_seed(0)


def _normalize(batch: torch.Tensor, plan: ExtractionPlan) -> torch.Tensor:
    mean = torch.tensor(plan.normalization_mean).view(1, 3, 1, 1)
    std = torch.tensor(plan.normalization_std).view(1, 3, 1, 1)
    return (batch - mean) / std


def _forward_and_dump(model, plan: ExtractionPlan, items: list[tuple[str, np.ndarray]],
                      out_dir: Path, want_logits: bool) -> dict[str, list]:
    """Batched forward passes; returns per-sample block refs (and logits ref)."""
    refs: dict[str, list] = {}
    recorder = TapRecorder(model, plan.block_taps)
    try:
        for start in range(0, len(items), plan.batch_size):
            chunk = items[start : start + plan.batch_size]
            raw = torch.stack([torch.from_numpy(arr) for _, arr in chunk])
            if raw.shape[-2:] != (plan.input_size, plan.input_size):
                # jigsaw cropping can shrink the canvas; restore the
                # model's native input size before normalization
                raw = torch.nn.functional.interpolate(
                    raw, size=(plan.input_size, plan.input_size),
                    mode="bilinear", align_corners=False,
                )
            with torch.no_grad():
                logits = model(_normalize(raw, plan))
            blocks = recorder.collect()
            for i, (sample_id, _) in enumerate(chunk):
                safe = sample_id.replace(":", "_").replace("/", "_")
                sample_refs = []
                for b, tensor in enumerate(blocks, start=1):
                    ref = f"{safe}_b{b:02d}.eood"
                    write_tensor(tensor[i].numpy(), out_dir / ref)
                    sample_refs.append((b, ref))
                entry = {"blocks": sample_refs}
                if want_logits:
                    ref = f"{safe}_logits.eood"
                    write_tensor(logits[i].numpy(), out_dir / ref)
                    entry["logits"] = ref
                refs[sample_id] = entry
    finally:
        recorder.close()
    return refs


def extract(image_dir, plan: ExtractionPlan, out_dir, *, split: str = "test_id",
            seed: int = 0, logits: bool | None = None, pretrained: bool = True,
            limit: int | None = None, dataset_name: str | None = None) -> Path:
    """Dump one tensor per (image, block); returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _deterministic_mode()
    want_logits = plan.include_logits if logits is None else logits

    model, got_pretrained = build_model(
        plan.model_name, pretrained, init_seed=seed, **dict(plan.model_kwargs)
    )
    model.eval()

    paths = list_images(image_dir)
    if limit is not None:
        paths = paths[:limit]
    items, warnings = [], []
    for path in paths:
        try:
            items.append((path.stem, load_image_tensor(path, plan.input_size)))
        except Exception as exc:
            message = f"skipped unreadable image {path.name}: {exc}"
            print(f"warning: {message}", file=sys.stderr)
            warnings.append(message)
    if not items:
        raise ValueError(f"no readable images in {image_dir}")

    refs = _forward_and_dump(model, plan, items, out_dir, want_logits)
    records = [
        record_obj(sid, split, entry["blocks"], entry.get("logits"))
        for sid, entry in sorted(refs.items())
    ]
    fingerprint = f"{plan.model_name}:L{plan.block_count}:{'pre' if got_pretrained else 'rand'}:seed{seed}"
    manifest = manifest_obj(
        dataset_name or Path(image_dir).name, records, plan.block_count,
        created_with=fingerprint, warnings=warnings,
    )
    path = out_dir / "manifest.json"
    save_manifest(manifest, path)
    return path


def _run_engine_jigsaw(manifest_path: Path, grid: int, seed: int, out_dir: Path) -> Path:
    exe = shutil.which("eood")
    if exe is None:
        raise RuntimeError("the engine CLI ('eood') is not on PATH")
    subprocess.run(
        [exe, "jigsaw", "--manifest", str(manifest_path), "--grid", str(grid),
         "--seed", str(seed), "--out", str(out_dir)],
        check=True,
    )
    return out_dir / "manifest.json"


def extract_with_jigsaw(image_dir, plan: ExtractionPlan, grid: int, seed: int, out_dir,
                        *, logits: bool | None = None, pretrained: bool = True,
                        limit: int | None = None, dataset_name: str | None = None) -> Path:
    """Extract features for each image and its jigsaw twin.

    Pipeline: write block-0 image dumps, let the engine CLI shuffle them,
    then run the model over originals and twins. Records are paired by the
    engine's sample-id suffix; originals land in id_calib, twins in
    pseudo_ood.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "block0"
    images_dir.mkdir(parents=True, exist_ok=True)
    _deterministic_mode()
    want_logits = plan.include_logits if logits is None else logits

    paths = list_images(image_dir)
    if limit is not None:
        paths = paths[:limit]
    originals, warnings = [], []
    records = []
    for path in paths:
        try:
            tensor = load_image_tensor(path, plan.input_size)
        except Exception as exc:
            message = f"skipped unreadable image {path.name}: {exc}"
            print(f"warning: {message}", file=sys.stderr)
            warnings.append(message)
            continue
        ref = f"{path.stem}_b00.eood"
        write_tensor(tensor, images_dir / ref)
        originals.append((path.stem, tensor))
        records.append(record_obj(path.stem, "id_calib", [(0, ref)]))
    if not originals:
        raise ValueError(f"no readable images in {image_dir}")
    interim = manifest_obj(dataset_name or Path(image_dir).name, records, 0)
    save_manifest(interim, images_dir / "manifest.json")

    shuffled_manifest = _run_engine_jigsaw(images_dir / "manifest.json", grid, seed, images_dir)
    shuffled = load_manifest(shuffled_manifest)
    twins = []
    for rec in shuffled["records"]:
        if rec["split"] != "pseudo_ood":
            continue
        ref = dict((b, p) for b, p in rec["block_refs"])[0]
        twins.append((rec["sample_id"], read_tensor(images_dir / ref)))

    model, got_pretrained = build_model(
        plan.model_name, pretrained, init_seed=seed, **dict(plan.model_kwargs)
    )
    model.eval()

    # originals and cropped twins can differ in canvas size; batch per group
    refs = _forward_and_dump(model, plan, originals, out_dir, want_logits)
    refs.update(_forward_and_dump(model, plan, twins, out_dir, want_logits))
    final_records = []
    for sid, entry in sorted(refs.items()):
        split = "pseudo_ood" if sid.endswith(PSEUDO_SUFFIX) else "id_calib"
        block_refs = list(entry["blocks"])
        base = sid[: -len(PSEUDO_SUFFIX)] if split == "pseudo_ood" else sid
        image_ref = f"block0/{base}_b00.eood" if split == "id_calib" else None
        if split == "pseudo_ood":
            # locate the twin's shuffled block-0 dump inside block0/
            twin_ref = dict(
                (r["sample_id"], r) for r in shuffled["records"]
            )[sid]["block_refs"][0][1]
            image_ref = f"block0/{twin_ref}"
        final_records.append(
            record_obj(sid, split, [(0, image_ref)] + block_refs, entry.get("logits"))
        )
    fingerprint = (
        f"{plan.model_name}:L{plan.block_count}:{'pre' if got_pretrained else 'rand'}"
        f":seed{seed}:grid{grid}"
    )
    manifest = manifest_obj(
        dataset_name or Path(image_dir).name, final_records, plan.block_count,
        created_with=fingerprint, warnings=warnings,
    )
    path = out_dir / "manifest.json"
    save_manifest(manifest, path)
    return path
