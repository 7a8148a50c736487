"""The bundled labeled exemplar and its deterministic synthetic generator.

The package ships one 256x256 H&E-look exemplar pair (image + mask) used by
the test suite, the documentation examples, and anyone without slides at
hand.  It is generated procedurally: villous bodies come from a thresholded
smoothed random field, colored as eosin-pink stroma with a darker
trophoblast-like rim and scattered nuclei; the intervillous space is a warm
plasma background with sparse red-blood-cell dots.
"""
from __future__ import annotations

from importlib import resources

import numpy as np
from scipy import ndimage as ndi
from scipy.ndimage import gaussian_filter

from .core import BinaryMask, LabeledPair, RasterImage, load_pair

_CROSS4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

BUNDLED_IMAGE = "exemplar_image.png"
BUNDLED_MASK = "exemplar_mask.png"
_DEFAULT_SEED = 1137


def _drop_small(phase: np.ndarray, min_area: int) -> np.ndarray:
    labels, n = ndi.label(phase, structure=_CROSS4)
    if n == 0:
        return phase
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]


def _stamp_dots(rng, candidates: np.ndarray, fraction: float, shape) -> np.ndarray:
    """Boolean canvas with small dots seeded on a fraction of candidate pixels."""
    dots = np.zeros(shape, dtype=bool)
    idx = np.flatnonzero(candidates)
    if idx.size == 0 or fraction <= 0:
        return dots
    count = max(1, int(round(idx.size * fraction)))
    chosen = rng.choice(idx, size=min(count, idx.size), replace=False)
    dots.ravel()[chosen] = True
    return ndi.binary_dilation(dots, _CROSS4)


def synthetic_exemplar(size: int = 256, seed: int = _DEFAULT_SEED,
                       villous_fraction: float = 0.56) -> LabeledPair:
    """Generate an H&E-look exemplar pair; same arguments, same bytes.

    The villous phase mixes rounded bodies (a high-passed smoothed random
    field, so the composition is spatially stationary) with fine structures:
    thin syncytial-bridge-like filaments and scattered knots near the
    villous boundaries.
    """
    rng = np.random.default_rng(seed)
    field = gaussian_filter(rng.standard_normal((size, size)), sigma=size / 36.0)
    field -= gaussian_filter(field, sigma=size / 12.8)
    field = (field - field.mean()) / field.std()
    villous = field > np.quantile(field, 1.0 - villous_fraction)
    villous = _drop_small(villous, 16)
    villous = ~_drop_small(~villous, 16)

    # fine villous elements: filaments along level sets of a fine field, plus knots
    fine = gaussian_filter(rng.standard_normal((size, size)), sigma=2.2)
    fine = (fine - fine.mean()) / fine.std()
    near = ndi.binary_dilation(villous, np.ones((11, 11), dtype=bool))
    threads = (np.abs(fine) < 0.08) & near & ~villous
    knot_sites = near & ~villous & ~threads
    knots = np.zeros((size, size), dtype=bool)
    candidates = np.flatnonzero(knot_sites)
    count = min(int(size * size * 0.005), candidates.size)
    knots.ravel()[rng.choice(candidates, size=count, replace=False)] = True
    villous = villous | threads | knots

    img = np.empty((size, size, 3), dtype=np.float64)
    plasma = gaussian_filter(rng.standard_normal((size, size)), sigma=3.0)
    img[:] = np.array([243.0, 238.0, 242.0]) + plasma[..., None] * 6.0

    mottle = gaussian_filter(rng.standard_normal((size, size)), sigma=6.0)
    stroma = np.array([214.0, 148.0, 180.0]) + mottle[..., None] * 14.0
    img = np.where(villous[..., None], stroma, img)

    # darker trophoblast-like rim along the villous boundary
    dist_in = ndi.distance_transform_edt(villous)
    rim = villous & (dist_in <= 2.0)
    img[rim] = img[rim] * 0.80 + np.array([158.0, 92.0, 164.0]) * 0.20

    nuclei = _stamp_dots(rng, rim, 0.030, (size, size))
    nuclei |= _stamp_dots(rng, villous & ~rim, 0.010, (size, size))
    img[nuclei] = np.array([96.0, 62.0, 136.0]) + rng.normal(0.0, 5.0, (int(nuclei.sum()), 3))

    rbc = _stamp_dots(rng, ~villous, 0.004, (size, size)) & ~villous
    img[rbc] = np.array([201.0, 119.0, 129.0]) + rng.normal(0.0, 4.0, (int(rbc.sum()), 3))

    img = gaussian_filter(img, sigma=(0.6, 0.6, 0.0))
    image = RasterImage(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))
    return LabeledPair(image, BinaryMask(villous.astype(np.uint8)))


def bundled_exemplar() -> LabeledPair:
    """Load the exemplar pair shipped with the package."""
    data = resources.files(__package__) / "data"
    return load_pair(str(data / BUNDLED_IMAGE), str(data / BUNDLED_MASK))


def write_bundled(directory) -> None:
    """Regenerate the bundled exemplar PNGs into ``directory``."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    pair = synthetic_exemplar()
    pair.image.save(out / BUNDLED_IMAGE)
    pair.mask.save(out / BUNDLED_MASK)
