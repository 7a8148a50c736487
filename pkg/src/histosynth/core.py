"""Raster containers, PNG I/O, and pixel-level primitives shared by all modules.

Conventions fixed project-wide:
  * arrays are row-major; ``(x, y)`` always means (column, row);
  * images are ``(H, W, 3)`` uint8, masks are ``(H, W)`` uint8 valued {0, 1}
    where 1 = villous tissue and 0 = intervillous space;
  * masks on disk are 8-bit grayscale PNG with levels 0 (intervillous) and
    255 (villous).

All container types are immutable after construction (the backing arrays are
frozen), so instances can be shared freely across threads and processes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MASK_ON_DISK_VILLOUS = 255
MASK_ON_DISK_INTERVILLOUS = 0

#: Valid flip axes: "x" mirrors left/right, "y" mirrors top/bottom.
FLIP_AXES = ("none", "x", "y", "xy")


class DecodeError(Exception):
    """A file could not be read or decoded as a raster."""


class DimensionMismatch(Exception):
    """Paired rasters do not share the same width and height."""


class NonBinaryMask(Exception):
    """A mask file holds more than two distinct intensity levels."""


class OutOfBounds(Exception):
    """A crop rectangle is not fully contained in the raster."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _decode(path, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert(mode))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc


@dataclass(frozen=True)
class RasterImage:
    """H x W RGB raster with 8-bit channels."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def save(self, path) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")

    @classmethod
    def load(cls, path) -> "RasterImage":
        return cls(_decode(path, "RGB"))


@dataclass(frozen=True)
class BinaryMask:
    """H x W segmentation mask, 1 = villous, 0 = intervillous."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected an (H, W) array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def save(self, path) -> None:
        on_disk = (self.pixels * MASK_ON_DISK_VILLOUS).astype(np.uint8)
        Image.fromarray(on_disk, mode="L").save(path, format="PNG")

    @classmethod
    def from_levels(cls, gray: np.ndarray) -> "BinaryMask":
        """Binarize a grayscale array holding at most two intensity levels.

        With two levels the darker one maps to 0 (intervillous) and the
        lighter one to 1 (villous).  A single-level array is resolved by the
        on-disk convention: levels >= 128 are villous.
        """
        levels = np.unique(gray)
        if levels.size > 2:
            raise NonBinaryMask(f"mask holds {levels.size} distinct levels, expected 2")
        if levels.size == 2:
            return cls((gray == levels[1]).astype(np.uint8))
        value = 1 if int(levels[0]) >= 128 else 0
        return cls(np.full(gray.shape, value, dtype=np.uint8))

    @classmethod
    def load(cls, path) -> "BinaryMask":
        return cls.from_levels(_decode(path, "L"))


@dataclass(frozen=True)
class LabeledPair:
    """An RGB raster bound to its ground-truth segmentation mask."""

    image: RasterImage
    mask: BinaryMask

    def __post_init__(self):
        if (self.image.width, self.image.height) != (self.mask.width, self.mask.height):
            raise DimensionMismatch(
                f"image is {self.image.width}x{self.image.height} but mask is "
                f"{self.mask.width}x{self.mask.height}"
            )

    @property
    def width(self) -> int:
        return self.image.width

    @property
    def height(self) -> int:
        return self.image.height


def load_pair(image_path, mask_path) -> LabeledPair:
    """Load an image/mask PNG pair, binarizing the mask by intensity level."""
    image = _decode(image_path, "RGB")
    gray = _decode(mask_path, "L")
    if image.shape[:2] != gray.shape:
        raise DimensionMismatch(
            f"{Path(image_path).name} is {image.shape[1]}x{image.shape[0]} but "
            f"{Path(mask_path).name} is {gray.shape[1]}x{gray.shape[0]}"
        )
    return LabeledPair(RasterImage(image), BinaryMask.from_levels(gray))


def save_pair(pair: LabeledPair, image_path, mask_path) -> None:
    pair.image.save(image_path)
    pair.mask.save(mask_path)


def flip(pair: LabeledPair, axis) -> LabeledPair:
    """Flip image and mask identically along the given axis.

    ``axis`` is one of "none"/None, "x", "y", "xy".
    """
    axis = "none" if axis is None else str(axis).lower()
    if axis not in FLIP_AXES:
        raise ValueError(f"axis must be one of {FLIP_AXES}, got {axis!r}")
    img = pair.image.pixels
    msk = pair.mask.pixels
    if axis in ("x", "xy"):
        img = img[:, ::-1]
        msk = msk[:, ::-1]
    if axis in ("y", "xy"):
        img = img[::-1]
        msk = msk[::-1]
    if axis == "none":
        return pair
    return LabeledPair(RasterImage(img.copy()), BinaryMask(msk.copy()))


def crop(pair: LabeledPair, x0: int, y0: int, w: int, h: int) -> LabeledPair:
    """Return the w x h sub-pair whose top-left corner is (x0, y0)."""
    if w <= 0 or h <= 0:
        raise OutOfBounds(f"crop size {w}x{h} is not positive")
    if x0 < 0 or y0 < 0 or x0 + w > pair.width or y0 + h > pair.height:
        raise OutOfBounds(
            f"crop ({x0},{y0})+{w}x{h} leaves the {pair.width}x{pair.height} raster"
        )
    img = pair.image.pixels[y0 : y0 + h, x0 : x0 + w].copy()
    msk = pair.mask.pixels[y0 : y0 + h, x0 : x0 + w].copy()
    return LabeledPair(RasterImage(img), BinaryMask(msk))
