import numpy as np
import pytest
from PIL import Image as PILImage

from eood_extractor import ExtractionPlan


def save_png(path, array_hwc_uint8):
    PILImage.fromarray(array_hwc_uint8, mode="RGB").save(path)


def make_smooth_images(folder, n, size=32, seed=0):
    """Low-frequency images: tiny random grids upsampled bilinearly."""
    folder.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        low = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        img = PILImage.fromarray(low, mode="RGB").resize((size, size), PILImage.BILINEAR)
        img.save(folder / f"smooth{i:04d}.png")
    return folder


def make_noise_images(folder, n, size=32, seed=1):
    folder.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_png(folder / f"noise{i:04d}.png", arr)
    return folder


@pytest.fixture()
def tiny_plan():
    """Small local model, three taps with strictly shrinking grids."""
    return ExtractionPlan(
        model_name="wrn28",
        block_taps=("group1.0", "group2.0", "group3.0"),
        input_size=32,
        normalization_mean=(0.5, 0.5, 0.5),
        normalization_std=(0.25, 0.25, 0.25),
        batch_size=4,
        model_kwargs=(("widen_factor", 1),),
    )
