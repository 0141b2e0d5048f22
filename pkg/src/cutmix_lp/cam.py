"""Turn class relevance heatmaps into binary activation mask stacks.

Heatmaps are produced externally (for example by attribution methods
run against a pretrained classifier) and ingested from disk; this module
only thresholds them. A plane belonging to a class that the image-level
label marks absent is forced to all-zero, so mask read-out can never
resurrect a class the image does not contain.
"""

import numpy as np

from .core import Heatmap, MaskStack, MultiLabel
from .errors import ConfigError, GeometryError


def threshold_heatmaps(heatmap: Heatmap, label: MultiLabel, t_cam: float) -> MaskStack:
    """Binarize ``heatmap`` at ``t_cam`` (inclusive), zeroing absent classes."""
    if not 0.0 <= t_cam <= 1.0:
        raise ConfigError("t_cam must lie in [0, 1]")
    if heatmap.num_classes != label.num_classes:
        raise GeometryError(
            f"heatmap has {heatmap.num_classes} planes, label {label.num_classes}"
        )
    planes = (heatmap.data >= t_cam).astype(np.uint8)
    planes *= label.bits[:, None, None]
    return MaskStack(planes)


def mask_stats(masks: MaskStack) -> np.ndarray:
    """Number of active pixels per class plane."""
    return masks.data.reshape(masks.num_classes, -1).sum(axis=1, dtype=np.int64)
