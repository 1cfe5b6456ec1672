"""Pseudo-OOD generation by jigsaw patch shuffling.

An image is center-cropped to the largest size divisible by the grid
side g, split into g x g equal tiles, and the tiles are rearranged by a
uniformly drawn non-identity permutation. The per-channel pixel multiset
of the cropped image is preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .types import _as_finite_array


@dataclass(frozen=True)
class Image:
    """Raw image tensor, row-major (channel, row, column), finite pixels."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.pixels, "Image pixels")
        if arr.ndim != 3:
            raise ValidationError(f"Image must be (channels, height, width), got shape {arr.shape}")
        if arr.shape[0] not in (1, 3):
            raise ValidationError(f"Image channels must be 1 or 3, got {arr.shape[0]}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValidationError("Image height and width must be >= 1")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


def center_crop_to_multiple(image: Image, grid: int) -> Image:
    """Largest centered crop whose height and width are multiples of grid."""
    ch = (image.height // grid) * grid
    cw = (image.width // grid) * grid
    if ch < grid or cw < grid:
        raise DomainError(f"image {image.height}x{image.width} smaller than {grid}x{grid} tiles")
    top = (image.height - ch) // 2
    left = (image.width - cw) // 2
    if ch == image.height and cw == image.width:
        return image
    return Image(image.pixels[:, top : top + ch, left : left + cw])


def _tiles(pixels: np.ndarray, grid: int) -> np.ndarray:
    c, h, w = pixels.shape
    th, tw = h // grid, w // grid
    # (grid*grid, c, th, tw), tile index row-major over the grid
    t = pixels.reshape(c, grid, th, grid, tw)
    return t.transpose(1, 3, 0, 2, 4).reshape(grid * grid, c, th, tw)


def apply_tile_permutation(image: Image, grid: int, permutation: np.ndarray) -> Image:
    """Rearrange tiles: output tile at slot t is input tile permutation[t].

    The image dimensions must already be divisible by grid.
    """
    perm = np.asarray(permutation, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(grid * grid)):
        raise DomainError(f"not a permutation of {grid * grid} tiles: {perm.tolist()}")
    if image.height % grid or image.width % grid:
        raise DomainError("image dimensions must be divisible by grid; crop first")
    tiles = _tiles(image.pixels, grid)
    shuffled = tiles[perm]
    th, tw = image.height // grid, image.width // grid
    out = (
        shuffled.reshape(grid, grid, image.channels, th, tw)
        .transpose(2, 0, 3, 1, 4)
        .reshape(image.channels, image.height, image.width)
    )
    return Image(out)


def inverse_permutation(permutation: np.ndarray) -> np.ndarray:
    return np.argsort(np.asarray(permutation, dtype=np.int64))


def jigsaw(image: Image, grid: int, rng: np.random.Generator) -> Image:
    """Center-crop, then shuffle g x g tiles with a non-identity permutation.

    The permutation is resampled while it leaves the image unchanged:
    always when it is the identity, and also when it only swaps identical
    tiles while the crop still has at least two distinct tiles.
    """
    if grid < 1:
        raise DomainError("grid must be >= 1")
    cropped = center_crop_to_multiple(image, grid)
    if grid == 1:
        return cropped
    tiles = _tiles(cropped.pixels, grid)
    n = grid * grid
    identity = np.arange(n)
    flat = tiles.reshape(n, -1)
    has_distinct_tiles = bool(np.any(flat != flat[0]))
    while True:
        perm = rng.permutation(n)
        if np.array_equal(perm, identity):
            continue
        if has_distinct_tiles and np.array_equal(flat[perm], flat):
            continue  # permutes identical tiles only; no visible shuffle
        break
    return apply_tile_permutation(cropped, grid, perm)


def generate_pseudo_set(samples: list[Image], grid: int, rng: np.random.Generator) -> list[Image]:
    """One jigsaw output per input, independent permutation per sample."""
    return [jigsaw(image, grid, rng) for image in samples]
