"""Patch-based synthesis of paired histology realizations, augmentation, and
intervillous morphometrics, all deterministic under explicit seeds."""

__version__ = "0.1.0"

from .augment import (
    BaseAugmentConfig,
    ElasticParams,
    color_shift,
    elastic_deform,
    rotate,
    sample_base_augmentation,
    zoom,
)
from .core import (
    BinaryMask,
    DecodeError,
    DimensionMismatch,
    LabeledPair,
    NonBinaryMask,
    OutOfBounds,
    RasterImage,
    crop,
    flip,
    load_pair,
    save_pair,
)
from .diversity import (
    DegenerateCloud,
    FeaturePoint,
    SweepResult,
    bounding_box_area,
    feature_cloud,
    grid_sweep,
    hull_area,
)
from .exemplar import bundled_exemplar, synthetic_exemplar
from .morphology import (
    ChamberLabeling,
    ChamberNetwork,
    MorphometricsReport,
    distance_map,
    extract_network,
    morphometrics,
    phase_features,
    watershed_chambers,
)
from .seeding import derived_rng, derived_seed
from .synth import (
    EmptyDataset,
    ExemplarTooSmall,
    FillState,
    GridSpec,
    MatchQuery,
    PatchDataset,
    Placement,
    build_dataset,
    find_match,
    generate_batch,
    generate_one,
    reconstruct,
    reconstruct_traced,
    render_placements,
    seam_differences,
)
