"""Deterministic CutMix with label propagation for multi-label rasters."""

import importlib

from .boxes import BoxSizeRange, gen_boxes, sample_partner_box
from .cam import mask_stats, threshold_heatmaps
from .core import (
    BoxR,
    Heatmap,
    ImageRaster,
    MaskStack,
    MultiLabel,
    PairReport,
    RefMap,
    SoftLabel,
    binary_mask,
    shift_box_content,
    validate_pair,
)
from .errors import (
    BadMagicError,
    ConfigError,
    CutmixLpError,
    DimOverflowError,
    GeometryError,
    ManifestError,
    RtenError,
    TruncatedPayloadError,
)
from .mixing import (
    AugmentedSample,
    LpConfig,
    Provenance,
    Sample,
    augment,
    compose_image,
    compose_map,
    compose_masks,
    naive_label,
    readout_phi,
    readout_psi,
)
from .dataset import Dataset, DatasetManifest, Geometry, load_dataset, write_dataset
from .formats import read_rten, rten_bytes, write_rten
from .pipeline import PipelineConfig, run_pipeline
from .rng import stream

__version__ = "0.1.0"

# The noise simulators pull in scipy.ndimage and the audit pulls the
# simulators' dependencies transitively; both load lazily so that CLI
# startup and plain augmentation stay light.
_LAZY_EXPORTS = {
    "MapIou": "noise",
    "NoiseResult": "noise",
    "NoiseSpec": "noise",
    "apply_noise_suite": "noise",
    "border_deformation": "noise",
    "class_swap": "noise",
    "dilate_erode": "noise",
    "map_iou": "noise",
    "mask_shift": "noise",
    "rectify_borders": "noise",
    "segment_swap": "noise",
    "AuditReport": "audit",
    "PolicyNoise": "audit",
    "run_audit": "audit",
}


def __getattr__(name):
    module_name = _LAZY_EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_LAZY_EXPORTS))


__all__ = [
    "AugmentedSample", "AuditReport", "BadMagicError", "BoxR", "BoxSizeRange",
    "ConfigError", "CutmixLpError", "Dataset", "DatasetManifest",
    "DimOverflowError", "Geometry", "GeometryError", "Heatmap", "ImageRaster",
    "LpConfig", "ManifestError", "MapIou", "MaskStack", "MultiLabel",
    "NoiseResult", "NoiseSpec", "PairReport", "PipelineConfig", "PolicyNoise",
    "Provenance", "RefMap", "RtenError", "Sample", "SoftLabel",
    "TruncatedPayloadError", "apply_noise_suite", "augment", "binary_mask",
    "border_deformation", "class_swap", "compose_image", "compose_map",
    "compose_masks", "dilate_erode", "gen_boxes", "load_dataset", "map_iou",
    "mask_shift", "mask_stats", "naive_label", "read_rten", "readout_phi",
    "readout_psi", "rectify_borders", "rten_bytes", "run_audit", "run_pipeline",
    "sample_partner_box", "segment_swap", "shift_box_content", "stream",
    "threshold_heatmaps", "validate_pair", "write_dataset", "write_rten",
]
