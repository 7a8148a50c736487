"""Patch-based synthesis of new paired realizations from one labeled exemplar.

The output canvas is divided into a ``grid_ratio x grid_ratio`` grid of
cells.  A dataset of candidate tiles is sampled from the exemplar with a
sliding window (5 px steps by default) and augmented with the three flipped
copies of every tile.  Cells are then visited in seeded random order; each
placement is chosen by minimizing the mean squared error between the
already-filled 5 px strips around the cell and the corresponding strips of
the candidate tiles, with unflipped candidates preferred.  Placed tiles are
fused into the canvas through a 10 px cubic-smoothstep transition band, and
the mask is co-reconstructed with the same tile choices (thresholded back to
binary and cleaned with a 3x3 opening under the blended band).

Tile anatomy.  Grid cells partition the canvas; ``tile_size`` is the cell
side (the last row/column absorbs any division remainder).  Each dataset
tile carries an ``overlap``-wide margin beyond the cell on every side that
has a neighboring cell, so a placement writes its cell plus margins, and the
transition band (5 px inside the cell edge, 5 px beyond it) always has both
new and pre-existing data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage as ndi

from .augment import BaseAugmentConfig, sample_base_augmentation
from .core import BinaryMask, LabeledPair, RasterImage
from .seeding import derived_rng, derived_seed

SIDES = ("left", "right", "top", "bottom")
_BOX3 = np.ones((3, 3), dtype=bool)


class ExemplarTooSmall(Exception):
    """The exemplar cannot supply a single tile at the requested geometry."""


class EmptyDataset(Exception):
    """A tile search was issued against a dataset with no entries."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the reconstruction grid.

    ``grid_ratio`` is the image-to-grid-size ratio: the output side divided
    by the tile side.  ``overlap`` is the shared margin between neighboring
    placements and also the half-width of the transition band.
    """

    output_size: int
    grid_ratio: int = 6
    overlap: int = 5

    def __post_init__(self):
        if self.output_size < 1:
            raise ValueError(f"output_size must be positive, got {self.output_size}")
        if self.grid_ratio < 1:
            raise ValueError(f"grid_ratio must be >= 1, got {self.grid_ratio}")
        if self.overlap < 1:
            raise ValueError(f"overlap must be >= 1, got {self.overlap}")
        if self.tile_size <= 2 * self.overlap:
            raise ValueError(
                f"tile size {self.tile_size} must exceed twice the overlap "
                f"({self.overlap}); lower grid_ratio or overlap"
            )

    @property
    def tile_size(self) -> int:
        return self.output_size // self.grid_ratio

    @property
    def remainder(self) -> int:
        return self.output_size - self.grid_ratio * self.tile_size

    @property
    def tile_extent(self) -> int:
        """Side length of the (square) dataset tiles.

        Must cover the largest cell plus its margins: interior cells need
        ``tile_size + 2 * overlap``; a last-row/column cell absorbs the grid
        remainder but only has margins on its leading sides.  A 1x1 grid has
        no neighbors at all, so its single tile is exactly the output.
        """
        if self.grid_ratio == 1:
            return self.output_size
        return max(self.tile_size + 2 * self.overlap,
                   self.tile_size + self.remainder + self.overlap)

    def cell_span(self, k: int) -> tuple[int, int]:
        """Half-open pixel range [start, stop) of grid row/column ``k``."""
        start = k * self.tile_size
        stop = self.output_size if k == self.grid_ratio - 1 else (k + 1) * self.tile_size
        return start, stop


@dataclass(frozen=True)
class _CellGeom:
    """Placement geometry of one grid cell, all in canvas coordinates.

    The tile's pixel (0, 0) maps onto canvas pixel (fx0, fy0); margins exist
    only toward existing neighbor cells, so the footprint never leaves the
    canvas.
    """

    row: int
    col: int
    y0: int
    y1: int
    x0: int
    x1: int
    top_margin: int
    left_margin: int
    bottom_margin: int
    right_margin: int

    @property
    def fy0(self) -> int:
        return self.y0 - self.top_margin

    @property
    def fy1(self) -> int:
        return self.y1 + self.bottom_margin

    @property
    def fx0(self) -> int:
        return self.x0 - self.left_margin

    @property
    def fx1(self) -> int:
        return self.x1 + self.right_margin

    @property
    def cell_h(self) -> int:
        return self.y1 - self.y0

    @property
    def cell_w(self) -> int:
        return self.x1 - self.x0


def _cell_geometry(spec: GridSpec, cell: tuple[int, int]) -> _CellGeom:
    i, j = cell
    g, o = spec.grid_ratio, spec.overlap
    if not (0 <= i < g and 0 <= j < g):
        raise ValueError(f"cell {cell} outside the {g}x{g} grid")
    y0, y1 = spec.cell_span(i)
    x0, x1 = spec.cell_span(j)
    return _CellGeom(
        row=i, col=j, y0=y0, y1=y1, x0=x0, x1=x1,
        top_margin=o if i > 0 else 0,
        left_margin=o if j > 0 else 0,
        bottom_margin=o if i < g - 1 else 0,
        right_margin=o if j < g - 1 else 0,
    )


def _tile_strip_box(spec: GridSpec, geom: _CellGeom, side: str) -> tuple[int, int, int, int]:
    """Tile-coordinate box (r0, r1, c0, c1) of the margin strip on ``side``."""
    o = spec.overlap
    tm, lm = geom.top_margin, geom.left_margin
    ch, cw = geom.cell_h, geom.cell_w
    if side == "left":
        return tm, tm + ch, 0, o
    if side == "right":
        return tm, tm + ch, lm + cw, lm + cw + o
    if side == "top":
        return 0, o, lm, lm + cw
    if side == "bottom":
        return tm + ch, tm + ch + o, lm, lm + cw
    raise ValueError(f"unknown side {side!r}")


def _canvas_strip_box(spec: GridSpec, geom: _CellGeom, side: str) -> tuple[int, int, int, int]:
    """Canvas-coordinate box of the constraint strip just outside the cell."""
    o = spec.overlap
    if side == "left":
        return geom.y0, geom.y1, geom.x0 - o, geom.x0
    if side == "right":
        return geom.y0, geom.y1, geom.x1, geom.x1 + o
    if side == "top":
        return geom.y0 - o, geom.y0, geom.x0, geom.x1
    if side == "bottom":
        return geom.y1, geom.y1 + o, geom.x0, geom.x1
    raise ValueError(f"unknown side {side!r}")


@dataclass
class PatchDataset:
    """Sliding-window tiles from one exemplar plus their flipped variants.

    Entries are stored flip-major: indices [0, n/4) hold the unflipped
    tiles in source raster order, followed by the x-, y-, and xy-flipped
    blocks in the same order.  ``positions`` records the (x0, y0) source
    window of each entry in the exemplar.
    """

    images: np.ndarray
    masks: np.ndarray
    flip_tags: np.ndarray
    positions: np.ndarray
    tile_extent: int
    stride: int
    spec: GridSpec
    _strips: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def unflipped_count(self) -> int:
        return len(self) // 4

    def entry(self, index: int):
        """(image tile, mask tile, flip tag, source position) of one entry."""
        return (
            self.images[index],
            self.masks[index],
            str(self.flip_tags[index]),
            (int(self.positions[index, 0]), int(self.positions[index, 1])),
        )

    def strip_matrix(self, box: tuple[int, int, int, int]) -> np.ndarray:
        """All entries' pixels in the tile box, flattened to int16 (N, K)."""
        cached = self._strips.get(box)
        if cached is None:
            r0, r1, c0, c1 = box
            region = self.images[:, r0:r1, c0:c1, :]
            cached = region.astype(np.int16).reshape(len(self), -1)
            self._strips[box] = cached
        return cached


def build_dataset(exemplar: LabeledPair, spec: GridSpec, stride: int = 5) -> PatchDataset:
    """Enumerate every stride-aligned tile window and its three flipped copies."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    extent = spec.tile_extent
    img = exemplar.image.pixels
    msk = exemplar.mask.pixels
    h, w = msk.shape
    if w < extent or h < extent:
        raise ExemplarTooSmall(
            f"exemplar {w}x{h} cannot supply a {extent}x{extent} tile "
            f"(output {spec.output_size}, grid ratio {spec.grid_ratio})"
        )
    nx = (w - extent) // stride + 1
    ny = (h - extent) // stride + 1

    win_i = sliding_window_view(img, (extent, extent), axis=(0, 1))[::stride, ::stride]
    win_m = sliding_window_view(msk, (extent, extent))[::stride, ::stride]
    tiles_i = np.ascontiguousarray(win_i.transpose(0, 1, 3, 4, 2)).reshape(-1, extent, extent, 3)
    tiles_m = np.ascontiguousarray(win_m).reshape(-1, extent, extent)

    xs, ys = np.meshgrid(np.arange(nx) * stride, np.arange(ny) * stride)
    positions = np.column_stack([xs.ravel(), ys.ravel()])

    images = np.concatenate([
        tiles_i,
        tiles_i[:, :, ::-1, :],
        tiles_i[:, ::-1, :, :],
        tiles_i[:, ::-1, ::-1, :],
    ])
    masks = np.concatenate([
        tiles_m,
        tiles_m[:, :, ::-1],
        tiles_m[:, ::-1, :],
        tiles_m[:, ::-1, ::-1],
    ])
    flip_tags = np.repeat(np.array(["none", "x", "y", "xy"]), len(tiles_i))
    return PatchDataset(
        images=np.ascontiguousarray(images),
        masks=np.ascontiguousarray(masks),
        flip_tags=flip_tags,
        positions=np.tile(positions, (4, 1)),
        tile_extent=extent,
        stride=stride,
        spec=spec,
    )


@dataclass(frozen=True)
class MatchQuery:
    """Edge constraints for one cell: canvas strips from filled neighbors."""

    cell: tuple[int, int]
    strips: dict

    def __post_init__(self):
        unknown = set(self.strips) - set(SIDES)
        if unknown:
            raise ValueError(f"unknown strip sides: {sorted(unknown)}")


def find_match(dataset: PatchDataset, query: MatchQuery, rng: np.random.Generator,
               priority_factor: float = 1.1) -> int:
    """Index of the dataset entry that best matches the query strips.

    The squared-error scan runs in exact integer arithmetic, so the argmin
    and its lowest-index tie-break are unambiguous.  Unflipped entries win
    whenever their best MSE is within ``priority_factor`` of the global
    best.  A query with no constrained edges draws uniformly from all
    entries using ``rng``.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("the patch dataset has no entries")
    if not query.strips:
        return int(rng.integers(n))

    geom = _cell_geometry(dataset.spec, query.cell)
    total = np.zeros(n, dtype=np.int64)
    for side in SIDES:
        strip = query.strips.get(side)
        if strip is None:
            continue
        box = _tile_strip_box(dataset.spec, geom, side)
        expected = (box[1] - box[0], box[3] - box[2], 3)
        if strip.shape != expected:
            raise ValueError(f"{side} strip has shape {strip.shape}, expected {expected}")
        mat = dataset.strip_matrix(box)
        diff = (mat - strip.astype(np.int16).ravel()).astype(np.int32)
        total += np.einsum("nk,nk->n", diff, diff, dtype=np.int64)

    p = dataset.unflipped_count
    best_unflipped = int(total[:p].min())
    best_global = int(total.min())
    if float(best_unflipped) <= priority_factor * float(best_global):
        return int(np.argmin(total[:p]))
    return int(np.argmin(total))


@dataclass
class FillState:
    """Mutable canvases and bookkeeping for one reconstruction run."""

    spec: GridSpec
    image: np.ndarray
    mask: np.ndarray
    written: np.ndarray
    occupancy: np.ndarray
    rng: np.random.Generator

    @classmethod
    def empty(cls, spec: GridSpec, rng: np.random.Generator) -> "FillState":
        s = spec.output_size
        g = spec.grid_ratio
        return cls(
            spec=spec,
            image=np.zeros((s, s, 3), dtype=np.uint8),
            mask=np.zeros((s, s), dtype=np.uint8),
            written=np.zeros((s, s), dtype=bool),
            occupancy=np.full((g, g), -1, dtype=np.int64),
            rng=rng,
        )

    def filled(self, cell: tuple[int, int]) -> bool:
        return self.occupancy[cell] >= 0

    def filled_sides(self, cell: tuple[int, int]) -> list[str]:
        i, j = cell
        g = self.spec.grid_ratio
        sides = []
        if j > 0 and self.filled((i, j - 1)):
            sides.append("left")
        if j < g - 1 and self.filled((i, j + 1)):
            sides.append("right")
        if i > 0 and self.filled((i - 1, j)):
            sides.append("top")
        if i < g - 1 and self.filled((i + 1, j)):
            sides.append("bottom")
        return sides

    def mark_filled(self, cell: tuple[int, int], entry_index: int) -> None:
        geom = _cell_geometry(self.spec, cell)
        self.occupancy[cell] = entry_index
        self.written[geom.fy0:geom.fy1, geom.fx0:geom.fx1] = True


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _blend_weights(state: FillState, cell: tuple[int, int]):
    """Per-pixel weight of the incoming tile over the placement footprint.

    Weight 1 writes the tile verbatim.  Inside the 2*overlap-wide band along
    each side with a filled neighbor, the ramp parameter t rises linearly
    from the existing side to the new side (sampled at pixel centers) and
    the weight is the cubic smoothstep 3t^2 - 2t^3; where several bands
    overlap (corners) the smallest t wins.  Pixels whose canvas content has
    never been written blend with nothing and stay verbatim.

    Returns (geometry, weights, band) where ``band`` flags the pixels that
    actually blend with existing content.
    """
    geom = _cell_geometry(state.spec, cell)
    o = state.spec.overlap
    fh = geom.fy1 - geom.fy0
    fw = geom.fx1 - geom.fx0
    t = np.ones((fh, fw), dtype=np.float64)

    ramp = (np.arange(2 * o) + 0.5) / (2 * o)
    for side in state.filled_sides(cell):
        if side == "left":
            lo = geom.x0 - o - geom.fx0
            t[:, lo:lo + 2 * o] = np.minimum(t[:, lo:lo + 2 * o], ramp[None, :])
        elif side == "right":
            lo = geom.x1 - o - geom.fx0
            t[:, lo:lo + 2 * o] = np.minimum(t[:, lo:lo + 2 * o], ramp[None, ::-1])
        elif side == "top":
            lo = geom.y0 - o - geom.fy0
            t[lo:lo + 2 * o, :] = np.minimum(t[lo:lo + 2 * o, :], ramp[:, None])
        else:
            lo = geom.y1 - o - geom.fy0
            t[lo:lo + 2 * o, :] = np.minimum(t[lo:lo + 2 * o, :], ramp[::-1, None])

    weights = np.where(t >= 1.0, 1.0, _smoothstep(t))
    weights[~state.written[geom.fy0:geom.fy1, geom.fx0:geom.fx1]] = 1.0
    band = weights < 1.0
    return geom, weights, band


def _round_half_up_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def blend_tile(state: FillState, dataset: PatchDataset, cell: tuple[int, int],
               entry_index: int) -> None:
    """Write one image tile into the canvas, fusing bands with existing pixels."""
    geom, weights, band = _blend_weights(state, cell)
    tile = dataset.images[entry_index]
    new = tile[: geom.fy1 - geom.fy0, : geom.fx1 - geom.fx0, :]
    region = state.image[geom.fy0:geom.fy1, geom.fx0:geom.fx1]
    w3 = weights[:, :, None]
    blended = _round_half_up_u8(w3 * new + (1.0 - w3) * region)
    state.image[geom.fy0:geom.fy1, geom.fx0:geom.fx1] = np.where(band[:, :, None], blended, new)


def blend_mask(state: FillState, dataset: PatchDataset, cell: tuple[int, int],
               entry_index: int) -> None:
    """Co-reconstruct the mask with the entry already used for the image.

    Band pixels are blended continuously, thresholded at 0.5 back to {0, 1},
    and cleaned with a binary 3x3 opening applied only under the band
    (erosion treats off-canvas as villous so a uniform mask is a fixed
    point; dilation treats it as empty).
    """
    geom, weights, band = _blend_weights(state, cell)
    new = dataset.masks[entry_index][: geom.fy1 - geom.fy0, : geom.fx1 - geom.fx0]
    region = state.mask[geom.fy0:geom.fy1, geom.fx0:geom.fx1]
    blended = (weights * new + (1.0 - weights) * region) >= 0.5
    state.mask[geom.fy0:geom.fy1, geom.fx0:geom.fx1] = np.where(band, blended.astype(np.uint8), new)

    if band.any():
        canvas_band = np.zeros(state.mask.shape, dtype=bool)
        canvas_band[geom.fy0:geom.fy1, geom.fx0:geom.fx1] = band
        _open_under_band(state.mask, canvas_band)


def _open_under_band(mask: np.ndarray, band: np.ndarray) -> None:
    """3x3 binary opening of the mask, applied in place to band pixels only."""
    ys, xs = np.nonzero(band)
    # 2 px of real context is enough for erosion followed by dilation
    y0 = max(int(ys.min()) - 2, 0)
    y1 = min(int(ys.max()) + 3, mask.shape[0])
    x0 = max(int(xs.min()) - 2, 0)
    x1 = min(int(xs.max()) + 3, mask.shape[1])
    window = mask[y0:y1, x0:x1].astype(bool)
    eroded = ndi.binary_erosion(window, _BOX3, border_value=1)
    opened = ndi.binary_dilation(eroded, _BOX3, border_value=0)
    sel = band[y0:y1, x0:x1]
    out = mask[y0:y1, x0:x1]
    out[sel] = opened[sel].astype(np.uint8)


@dataclass(frozen=True)
class Placement:
    cell: tuple[int, int]
    entry_index: int


def build_query(state: FillState, cell: tuple[int, int]) -> MatchQuery:
    """Constraint strips for ``cell`` from the currently filled neighbors."""
    geom = _cell_geometry(state.spec, cell)
    strips = {}
    for side in state.filled_sides(cell):
        cy0, cy1, cx0, cx1 = _canvas_strip_box(state.spec, geom, side)
        strips[side] = state.image[cy0:cy1, cx0:cx1].copy()
    return MatchQuery(cell=cell, strips=strips)


def reconstruct_traced(
    exemplar: LabeledPair,
    spec: GridSpec,
    seed: int,
    *,
    stride: int = 5,
    priority_factor: float = 1.1,
    dataset: Optional[PatchDataset] = None,
) -> tuple[LabeledPair, list[Placement]]:
    """Like :func:`reconstruct`, but also returns the placement trace."""
    if dataset is None:
        dataset = build_dataset(exemplar, spec, stride)
    elif dataset.spec != spec:
        raise ValueError("dataset was built for a different grid spec")
    rng = np.random.default_rng(seed)
    state = FillState.empty(spec, rng)
    g = spec.grid_ratio
    placements = []
    for flat in rng.permutation(g * g):
        cell = (int(flat) // g, int(flat) % g)
        query = build_query(state, cell)
        entry = find_match(dataset, query, rng=state.rng, priority_factor=priority_factor)
        blend_tile(state, dataset, cell, entry)
        blend_mask(state, dataset, cell, entry)
        state.mark_filled(cell, entry)
        placements.append(Placement(cell=cell, entry_index=entry))
    assert state.written.all(), "fill cycle left unwritten pixels"
    return LabeledPair(RasterImage(state.image), BinaryMask(state.mask)), placements


def reconstruct(
    exemplar: LabeledPair,
    spec: GridSpec,
    seed: int,
    *,
    stride: int = 5,
    priority_factor: float = 1.1,
    dataset: Optional[PatchDataset] = None,
) -> LabeledPair:
    """Synthesize one new realization of the exemplar on the given grid.

    Deterministic: the same (exemplar, spec, seed) always yields bit-identical
    image and mask.
    """
    pair, _ = reconstruct_traced(
        exemplar, spec, seed, stride=stride, priority_factor=priority_factor, dataset=dataset
    )
    return pair


def render_placements(dataset: PatchDataset, spec: GridSpec, placements: list[Placement],
                      blend: bool = True) -> LabeledPair:
    """Replay a placement trace onto a fresh canvas.

    With ``blend=False`` each cell receives only its core pixels, written
    verbatim with no transition bands: the naive grid paste that blending is
    compared against.
    """
    state = FillState.empty(spec, np.random.default_rng(0))
    for placement in placements:
        cell, entry = placement.cell, placement.entry_index
        if blend:
            blend_tile(state, dataset, cell, entry)
            blend_mask(state, dataset, cell, entry)
        else:
            geom = _cell_geometry(spec, cell)
            tile_i = dataset.images[entry]
            tile_m = dataset.masks[entry]
            r0, c0 = geom.top_margin, geom.left_margin
            state.image[geom.y0:geom.y1, geom.x0:geom.x1] = \
                tile_i[r0:r0 + geom.cell_h, c0:c0 + geom.cell_w]
            state.mask[geom.y0:geom.y1, geom.x0:geom.x1] = \
                tile_m[r0:r0 + geom.cell_h, c0:c0 + geom.cell_w]
        state.mark_filled(cell, entry)
    return LabeledPair(RasterImage(state.image), BinaryMask(state.mask))


def seam_differences(image: RasterImage, spec: GridSpec) -> dict:
    """Mean absolute cross-seam channel difference at every interior boundary.

    Keys are (row, col, orientation) of the cell on the low side of the
    boundary; orientation "v" compares the last column of cell (row, col)
    with the first column of cell (row, col + 1), "h" likewise across rows.
    """
    px = image.pixels.astype(np.float64)
    g = spec.grid_ratio
    out = {}
    for i in range(g):
        y0, y1 = spec.cell_span(i)
        for j in range(g - 1):
            _, x1 = spec.cell_span(j)
            out[(i, j, "v")] = float(np.mean(np.abs(px[y0:y1, x1, :] - px[y0:y1, x1 - 1, :])))
    for i in range(g - 1):
        _, y1 = spec.cell_span(i)
        for j in range(g):
            x0, x1 = spec.cell_span(j)
            out[(i, j, "h")] = float(np.mean(np.abs(px[y1, x0:x1, :] - px[y1 - 1, x0:x1, :])))
    return out


def generate_one(
    exemplar: LabeledPair,
    spec: GridSpec,
    base_cfg: BaseAugmentConfig,
    method: str,
    seed: int,
    index: int,
    *,
    stride: int = 5,
    priority_factor: float = 1.1,
) -> LabeledPair:
    """Sample number ``index`` of a batch, reproducible in isolation.

    ``method`` is "base" for the augmentation chain alone or "proposed" for
    the chain followed by grid reconstruction.
    """
    if method not in ("base", "proposed"):
        raise ValueError(f"method must be 'base' or 'proposed', got {method!r}")
    pair = sample_base_augmentation(exemplar, base_cfg, derived_rng(seed, "augment", index))
    if method == "base":
        return pair
    return reconstruct(
        pair, spec, derived_seed(seed, "reconstruct", index),
        stride=stride, priority_factor=priority_factor,
    )


def generate_batch(
    exemplar: LabeledPair,
    spec: GridSpec,
    base_cfg: BaseAugmentConfig,
    n: int,
    seed: int,
    *,
    method: str = "proposed",
    stride: int = 5,
    priority_factor: float = 1.1,
) -> list[LabeledPair]:
    """Generate ``n`` samples with per-sample derived seeds.

    The list is materialized in memory; for large batches prefer iterating
    :func:`generate_one` and writing each sample to disk.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [
        generate_one(exemplar, spec, base_cfg, method, seed, i,
                     stride=stride, priority_factor=priority_factor)
        for i in range(n)
    ]
