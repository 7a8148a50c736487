"""The literature-standard augmentation chain for labeled histology pairs.

The chain applies, in a fixed order, per-channel color shift, zoom,
clockwise rotation, flips, and sinusoidal elastic deformation.  Image
channels are resampled bilinearly, masks with nearest-neighbor, so masks
stay strictly binary.  Continuous channel math is rounded half-up once at
the end of each transform to keep outputs platform-stable.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import FLIP_AXES, BinaryMask, LabeledPair, RasterImage, flip


def _round_half_up_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _resample(pair: LabeledPair, sample_x: np.ndarray, sample_y: np.ndarray, mode: str) -> LabeledPair:
    """Sample the pair at fractional source coordinates (bilinear / nearest)."""
    coords = np.stack([sample_y, sample_x])
    img = np.empty(sample_x.shape + (3,), dtype=np.uint8)
    for c in range(3):
        channel = pair.image.pixels[:, :, c].astype(np.float64)
        img[:, :, c] = _round_half_up_u8(ndi.map_coordinates(channel, coords, order=1, mode=mode))
    msk = ndi.map_coordinates(pair.mask.pixels, coords, order=0, mode=mode)
    return LabeledPair(RasterImage(img), BinaryMask(msk.astype(np.uint8)))


@dataclass(frozen=True)
class ElasticParams:
    """Parameters of the sinusoidal elastic wave.

    ``amplitude`` scales the displacement (0 disables the deformation),
    ``mesh_ratio`` sets the number of wave periods across the raster, and
    ``phase`` shifts the wave angle by up to half a turn.

    ``y_wave_uses_y``: the published form of the vertical displacement
    evaluates its cosine at the x coordinate.  Switching this on evaluates
    it at y instead (the symmetric variant); off reproduces the published
    form exactly.
    """

    amplitude: float
    mesh_ratio: float
    phase: float
    y_wave_uses_y: bool = False

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude must be in [0, 1], got {self.amplitude}")
        if not 1.0 <= self.mesh_ratio <= 5.0:
            raise ValueError(f"mesh_ratio must be in [1, 5], got {self.mesh_ratio}")
        if not 0.0 <= self.phase <= 1.0:
            raise ValueError(f"phase must be in [0, 1], got {self.phase}")


def elastic_coordinates(width: int, height: int, params: ElasticParams):
    """Source sample coordinates (sample_x, sample_y) for the elastic warp.

    For an output pixel (x, y):

        sample_x = x + 0.025 * W * amplitude * sin(pi * x * M / W + pi * phase)
        sample_y = y + 0.025 * H * amplitude * cos(pi * a * M / H + pi * phase)

    with ``a = x`` by default and ``a = y`` when ``y_wave_uses_y`` is set.
    The displacement is therefore bounded by 0.025 * W * amplitude along x
    and 0.025 * H * amplitude along y.
    """
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    m, r = params.mesh_ratio, params.phase
    sample_x = x + (0.025 * width * params.amplitude) * np.sin(np.pi * x * m / width + np.pi * r)
    arg = y if params.y_wave_uses_y else x
    sample_y = y + (0.025 * height * params.amplitude) * np.cos(np.pi * arg * m / height + np.pi * r)
    return sample_x, sample_y


def elastic_deform(pair: LabeledPair, params: ElasticParams) -> LabeledPair:
    """Apply the sinusoidal elastic warp; out-of-range samples clamp to the border."""
    if pair.width < 2 or pair.height < 2:
        raise ValueError("elastic deformation needs a raster of at least 2x2")
    if params.amplitude == 0.0:
        return pair
    sample_x, sample_y = elastic_coordinates(pair.width, pair.height, params)
    return _resample(pair, sample_x, sample_y, mode="nearest")


def color_shift(image: RasterImage, deltas) -> RasterImage:
    """Scale each channel by (1 + delta), clamp to [0, 255], round half-up."""
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != (3,):
        raise ValueError(f"expected 3 per-channel deltas, got shape {deltas.shape}")
    if np.abs(deltas).max() > 1.0:
        raise ValueError("channel deltas must not exceed 100%")
    scaled = image.pixels.astype(np.float64) * (1.0 + deltas)
    return RasterImage(_round_half_up_u8(scaled))


def zoom(pair: LabeledPair, factor: float) -> LabeledPair:
    """Upscale by ``factor`` and center-crop back to the input dimensions."""
    if factor < 1.0:
        raise ValueError(f"zoom factor must be >= 1, got {factor}")
    if factor == 1.0:
        return pair
    w, h = pair.width, pair.height
    new_w = int(np.floor(w * factor + 0.5))
    new_h = int(np.floor(h * factor + 0.5))
    off_x = (new_w - w) // 2
    off_y = (new_h - h) // 2
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    # pixel-center convention for the implicit upscale, then the center crop
    sample_x = (x + off_x + 0.5) / factor - 0.5
    sample_y = (y + off_y + 0.5) / factor - 0.5
    return _resample(pair, sample_x, sample_y, mode="nearest")


def rotate(pair: LabeledPair, angle_deg: float) -> LabeledPair:
    """Rotate clockwise about the raster center; revealed borders are reflected."""
    if not 0.0 <= angle_deg < 90.0:
        raise ValueError(f"rotation angle must be in [0, 90), got {angle_deg}")
    if angle_deg == 0.0:
        return pair
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cx = (pair.width - 1) / 2.0
    cy = (pair.height - 1) / 2.0
    y, x = np.mgrid[0 : pair.height, 0 : pair.width].astype(np.float64)
    dx, dy = x - cx, y - cy
    sample_x = cx + cos_t * dx + sin_t * dy
    sample_y = cy - sin_t * dx + cos_t * dy
    return _resample(pair, sample_x, sample_y, mode="reflect")


@dataclass(frozen=True)
class BaseAugmentConfig:
    """Ranges, enable flags, and seed for the base augmentation chain."""

    color_shift_limit: float = 0.10
    zoom_max: float = 1.5
    rotation_max: float = 10.0
    enable_color_shift: bool = True
    enable_zoom: bool = True
    enable_rotation: bool = True
    enable_flip: bool = True
    enable_elastic: bool = True
    elastic_y_uses_y: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.color_shift_limit <= 1.0:
            raise ValueError(f"color_shift_limit must be in [0, 1], got {self.color_shift_limit}")
        if self.zoom_max < 1.0:
            raise ValueError(f"zoom_max must be >= 1, got {self.zoom_max}")
        if not 0.0 <= self.rotation_max < 90.0:
            raise ValueError(f"rotation_max must be in [0, 90), got {self.rotation_max}")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BaseAugmentConfig":
        data = json.loads(text)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def sample_base_augmentation(pair: LabeledPair, config: BaseAugmentConfig, rng=None) -> LabeledPair:
    """Draw one augmented pair: color shift -> zoom -> rotate -> flip -> elastic.

    Each enabled transform draws its parameters uniformly from the configured
    range.  The result is a pure function of (pair, config, rng state); with
    ``rng=None`` a fresh generator is seeded from ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    out = pair
    if config.enable_color_shift:
        limit = config.color_shift_limit
        deltas = rng.uniform(-limit, limit, size=3)
        out = LabeledPair(color_shift(out.image, deltas), out.mask)
    if config.enable_zoom:
        out = zoom(out, float(rng.uniform(1.0, config.zoom_max)))
    if config.enable_rotation:
        out = rotate(out, float(rng.uniform(0.0, config.rotation_max)))
    if config.enable_flip:
        out = flip(out, FLIP_AXES[int(rng.integers(0, 4))])
    if config.enable_elastic:
        params = ElasticParams(
            amplitude=float(rng.uniform(0.0, 1.0)),
            mesh_ratio=float(rng.uniform(1.0, 5.0)),
            phase=float(rng.uniform(0.0, 1.0)),
            y_wave_uses_y=config.elastic_y_uses_y,
        )
        out = elastic_deform(out, params)
    return out
