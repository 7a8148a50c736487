"""Quantitative characterization of the intervillous space of a binary mask.

The pipeline: exact Euclidean distance map of the void phase (the raster
border counts as a wall), marker-based watershed of the negated map into
chambers, 8-neighborhood chamber adjacency network, and scalar summaries
(volume fraction, specific surface, chamber radii, mean connectivity).

Connectivity conventions: chambers and the phase boundary use the
4-neighborhood, chamber adjacency uses the 8-neighborhood.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from skimage.morphology import local_maxima, reconstruction
from skimage.segmentation import watershed

from .core import BinaryMask

_CROSS4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_BOX8 = np.ones((3, 3), dtype=bool)


def _mask_array(mask) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.pixels
    arr = np.asarray(mask)
    if arr.ndim != 2 or not np.isin(arr, (0, 1)).all():
        raise ValueError("mask must be a 2-D array of {0, 1}")
    return arr.astype(np.uint8)


def distance_map(mask) -> np.ndarray:
    """Exact Euclidean distance from each intervillous pixel to the nearest wall.

    Villous pixels carry 0.  The raster border is treated as villous, so
    every distance is finite.
    """
    m = _mask_array(mask)
    padded = np.pad(m, 1, constant_values=1)
    dist = ndi.distance_transform_edt(padded == 0)
    return dist[1:-1, 1:-1]


@dataclass(frozen=True)
class ChamberLabeling:
    """Partition of the intervillous space into watershed chambers.

    ``labels`` holds 0 on villous pixels and chamber ids 1..chamber_count
    elsewhere.  ``radii[k]``/``areas[k]`` describe chamber k + 1: the radius
    is that of the maximal inscribed circle (the peak of the distance map
    inside the chamber), the area its pixel count.
    """

    labels: np.ndarray
    chamber_count: int
    radii: np.ndarray
    areas: np.ndarray


def _h_maxima_markers(dmap: np.ndarray, h_min: float) -> np.ndarray:
    """Boolean marker plateaus: regional maxima deeper than ``h_min``."""
    void = dmap > 0
    if h_min > 0:
        seed = np.where(void, dmap - h_min, 0.0)
        suppressed = reconstruction(seed, dmap, method="dilation")
        peaks = local_maxima(suppressed, connectivity=2)
    else:
        peaks = local_maxima(dmap, connectivity=2)
    return peaks & void


def watershed_chambers(dmap: np.ndarray, h_min: float = 2.0) -> ChamberLabeling:
    """Flood the negated distance map from depth-suppressed maxima.

    Every intervillous pixel lands in exactly one chamber: void components
    whose maxima were all suppressed get a fallback marker at their deepest
    point, and watershed-ridge pixels are assigned to the adjacent chamber
    with the larger distance value (ties to the lower label).
    """
    if h_min < 0:
        raise ValueError(f"h_min must be >= 0, got {h_min}")
    void = dmap > 0
    if not void.any():
        empty = np.zeros(dmap.shape, dtype=np.int32)
        return ChamberLabeling(empty, 0, np.empty(0), np.empty(0, dtype=np.int64))

    markers = _h_maxima_markers(dmap, h_min)

    # a marker plateau must not straddle two 4-connected void components
    components, n_comp = ndi.label(void, structure=_CROSS4)
    covered = np.unique(components[markers])
    for comp_id in range(1, n_comp + 1):
        if comp_id not in covered:
            inside = np.where((components == comp_id).ravel(), dmap.ravel(), -1.0)
            markers.ravel()[int(np.argmax(inside))] = True

    plateau_ids, _ = ndi.label(markers, structure=_BOX8)
    split = plateau_ids.astype(np.int64) * (n_comp + 1) + components
    _, inverse = np.unique(split[markers], return_inverse=True)
    seed_labels = np.zeros(dmap.shape, dtype=np.int32)
    seed_labels[markers] = inverse.astype(np.int32) + 1

    labels = watershed(-dmap, markers=seed_labels, mask=void, connectivity=1,
                       watershed_line=True).astype(np.int32)
    _assign_ridges(labels, dmap, void)

    count = int(labels.max())
    radii = ndi.maximum(dmap, labels=labels, index=np.arange(1, count + 1))
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    return ChamberLabeling(labels, count, np.atleast_1d(radii), areas)


def _assign_ridges(labels: np.ndarray, dmap: np.ndarray, void: np.ndarray) -> None:
    """Assign ridge pixels to the 4-neighbor chamber with the larger distance."""
    while True:
        unassigned = void & (labels == 0)
        if not unassigned.any():
            return
        best_dist = np.full(labels.shape, -1.0)
        best_label = np.zeros_like(labels)
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb_label = np.zeros_like(labels)
            nb_dist = np.full(labels.shape, -1.0)
            src = (slice(max(dy, 0), labels.shape[0] + min(dy, 0)),
                   slice(max(dx, 0), labels.shape[1] + min(dx, 0)))
            dst = (slice(max(-dy, 0), labels.shape[0] + min(-dy, 0)),
                   slice(max(-dx, 0), labels.shape[1] + min(-dx, 0)))
            nb_label[dst] = labels[src]
            nb_dist[dst] = np.where(labels[src] > 0, dmap[src], -1.0)
            better = (nb_dist > best_dist) | ((nb_dist == best_dist) & (nb_label > 0)
                                              & ((nb_label < best_label) | (best_label == 0)))
            best_dist = np.where(better, nb_dist, best_dist)
            best_label = np.where(better, nb_label, best_label)
        ready = unassigned & (best_label > 0)
        if not ready.any():
            raise RuntimeError("ridge assignment stalled on isolated pixels")
        labels[ready] = best_label[ready]


@dataclass(frozen=True)
class ChamberNetwork:
    """Chamber adjacency graph: nodes are chamber ids, edges are 8-contacts."""

    nodes: tuple
    edges: frozenset

    @property
    def mean_connectivity(self) -> float:
        if not self.nodes:
            return 0.0
        return 2.0 * len(self.edges) / len(self.nodes)


def extract_network(labeling: ChamberLabeling) -> ChamberNetwork:
    """Edge (a, b) exists iff chambers a and b share an 8-neighbor contact."""
    labels = labeling.labels
    h, w = labels.shape
    pairs = []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        ay0, ay1 = max(0, -dy), h - max(0, dy)
        ax0, ax1 = max(0, -dx), w - max(0, dx)
        a = labels[ay0:ay1, ax0:ax1]
        b = labels[ay0 + dy:ay1 + dy, ax0 + dx:ax1 + dx]
        touch = (a > 0) & (b > 0) & (a != b)
        if touch.any():
            lo = np.minimum(a[touch], b[touch])
            hi = np.maximum(a[touch], b[touch])
            pairs.append(np.unique(np.column_stack([lo, hi]), axis=0))
    if pairs:
        edges = frozenset(map(tuple, np.unique(np.concatenate(pairs), axis=0).tolist()))
    else:
        edges = frozenset()
    return ChamberNetwork(nodes=tuple(range(1, labeling.chamber_count + 1)), edges=edges)


def phase_features(mask) -> tuple[float, float]:
    """(volume fraction, specific surface) of the intervillous phase.

    Volume fraction is the intervillous share of all pixels.  Specific
    surface is the count of villous/intervillous unit edges (4-neighborhood,
    raster border counted as villous) divided by the intervillous pixel
    count; it is defined as 0 when there is no intervillous space.
    """
    m = _mask_array(mask)
    void_count = int((m == 0).sum())
    volume_fraction = void_count / m.size
    if void_count == 0:
        return volume_fraction, 0.0
    padded = np.pad(m, 1, constant_values=1)
    edges = int((padded[:, :-1] != padded[:, 1:]).sum()) + int((padded[:-1, :] != padded[1:, :]).sum())
    return volume_fraction, edges / void_count


@dataclass(frozen=True)
class MorphometricsReport:
    """Scalar morphology summary of one mask."""

    volume_fraction: float
    specific_surface: float
    mean_chamber_radius: float
    mean_connectivity: float
    chamber_count: int
    radius_bin_edges: tuple
    radius_counts: tuple

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def radius_histogram_rows(self) -> list[tuple[float, int]]:
        """(bin center, count) rows for CSV export."""
        edges = self.radius_bin_edges
        return [((edges[i] + edges[i + 1]) / 2.0, int(c))
                for i, c in enumerate(self.radius_counts)]


def morphometrics(mask, h_min: float = 2.0) -> MorphometricsReport:
    """Full morphology summary: phase features plus the watershed pipeline.

    The chamber radius histogram uses 1 px bins.
    """
    volume_fraction, specific_surface = phase_features(mask)
    m = _mask_array(mask)
    if (m == 0).any():
        labeling = watershed_chambers(distance_map(m), h_min=h_min)
        network = extract_network(labeling)
        radii = labeling.radii
        mean_radius = float(radii.mean()) if radii.size else 0.0
        mean_conn = network.mean_connectivity
        hi = int(np.ceil(radii.max())) + 1 if radii.size else 1
        counts, edges = np.histogram(radii, bins=np.arange(0, hi + 1))
        chamber_count = labeling.chamber_count
    else:
        mean_radius = 0.0
        mean_conn = 0.0
        chamber_count = 0
        counts, edges = np.histogram([], bins=np.arange(0, 2))
    return MorphometricsReport(
        volume_fraction=float(volume_fraction),
        specific_surface=float(specific_surface),
        mean_chamber_radius=mean_radius,
        mean_connectivity=float(mean_conn),
        chamber_count=chamber_count,
        radius_bin_edges=tuple(float(e) for e in edges),
        radius_counts=tuple(int(c) for c in counts),
    )
