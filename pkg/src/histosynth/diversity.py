"""Dataset-level analyses: feature-domain clouds, coverage, grid-ratio sweeps.

Each mask is reduced to the 2-D feature point (intervillous volume fraction,
intervillous specific surface).  Coverage of a point cloud is measured as
the area of its convex hull, with the axis-aligned bounding box exposed as a
cruder alternative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabeledPair
from .morphology import phase_features
from .seeding import derived_seed
from .synth import GridSpec, build_dataset, reconstruct

SOURCE_TAGS = ("training", "validation", "base_case", "proposed")


class DegenerateCloud(Exception):
    """Fewer than three non-collinear points: the cloud has no area."""


@dataclass(frozen=True)
class FeaturePoint:
    """One mask reduced to the (volume fraction, specific surface) plane."""

    volume_fraction: float
    specific_surface: float
    source_tag: str

    def __post_init__(self):
        if self.source_tag not in SOURCE_TAGS:
            raise ValueError(f"source_tag must be one of {SOURCE_TAGS}, got {self.source_tag!r}")
        if not (np.isfinite(self.volume_fraction) and np.isfinite(self.specific_surface)):
            raise ValueError("feature values must be finite")


def feature_cloud(masks, tag: str) -> list[FeaturePoint]:
    """One FeaturePoint per mask, in input order."""
    masks = list(masks)
    if not masks:
        raise ValueError("feature_cloud needs at least one mask")
    points = []
    for mask in masks:
        vf, ss = phase_features(mask)
        points.append(FeaturePoint(vf, ss, tag))
    return points


def _point_array(points) -> np.ndarray:
    return np.array([(p.volume_fraction, p.specific_surface) for p in points], dtype=np.float64)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in counterclockwise order."""
    pts = np.unique(pts, axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) > 1 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) > 1 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def hull_area(points) -> float:
    """Area of the convex hull of a feature cloud.

    Raises :class:`DegenerateCloud` for fewer than three points or a
    collinear cloud.
    """
    pts = _point_array(points)
    if len(pts) < 3:
        raise DegenerateCloud(f"need at least 3 points, got {len(pts)}")
    hull = _convex_hull(pts)
    if len(hull) < 3:
        raise DegenerateCloud("all points are collinear")
    x, y = hull[:, 0], hull[:, 1]
    area = 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    if area == 0.0:
        raise DegenerateCloud("all points are collinear")
    return area


def bounding_box_area(points) -> float:
    """Area of the axis-aligned bounding box of a feature cloud."""
    pts = _point_array(points)
    if len(pts) == 0:
        raise DegenerateCloud("empty cloud")
    spans = pts.max(axis=0) - pts.min(axis=0)
    return float(spans[0] * spans[1])


@dataclass(frozen=True)
class SweepResult:
    """Per-repeat phase features of reconstructions at one grid ratio."""

    grid_ratio: int
    volume_fractions: tuple
    specific_surfaces: tuple

    @property
    def repeats(self) -> int:
        return len(self.volume_fractions)

    @property
    def mean_volume_fraction(self) -> float:
        return float(np.mean(self.volume_fractions))

    @property
    def std_volume_fraction(self) -> float:
        return float(np.std(self.volume_fractions))

    @property
    def mean_specific_surface(self) -> float:
        return float(np.mean(self.specific_surfaces))

    @property
    def std_specific_surface(self) -> float:
        return float(np.std(self.specific_surfaces))


def grid_sweep(
    exemplar: LabeledPair,
    ratios,
    repeats: int,
    seed: int,
    *,
    overlap: int = 5,
    stride: int = 5,
    priority_factor: float = 1.1,
) -> list[SweepResult]:
    """Reconstruct ``repeats`` times at each grid ratio and collect features.

    Every (ratio, repeat) cell runs under its own derived seed, so any single
    cell is reproducible in isolation.
    """
    ratios = [int(r) for r in ratios]
    if not ratios:
        raise ValueError("ratios must be non-empty")
    if any(r < 1 for r in ratios):
        raise ValueError("all ratios must be >= 1")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    size = min(exemplar.width, exemplar.height)
    results = []
    for ratio in ratios:
        spec = GridSpec(output_size=size, grid_ratio=ratio, overlap=overlap)
        dataset = build_dataset(exemplar, spec, stride)
        vfs, sss = [], []
        for rep in range(repeats):
            pair = reconstruct(
                exemplar, spec, derived_seed(seed, "sweep", ratio, rep),
                stride=stride, priority_factor=priority_factor, dataset=dataset,
            )
            vf, ss = phase_features(pair.mask)
            vfs.append(vf)
            sss.append(ss)
        results.append(SweepResult(ratio, tuple(vfs), tuple(sss)))
    return results
