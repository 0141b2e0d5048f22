"""Pairing engine: compose two samples into one augmented sample.

The image pairing cuts a box out of the base image and fills it with a
same-sized box from the partner image. The label of the result is
produced by one of three policies:

  * ``naive``   - area-weighted soft mix of the two multi-labels;
  * ``lp_map``  - compose the reference maps the same way as the images
                  and read the surviving classes out of the result;
  * ``lp_xai``  - compose per-class activation masks and keep classes
                  whose surviving activation count exceeds ``t_map``.

The two read-out policies propagate exactly the classes that keep
supporting pixels, so the resulting labels carry no additive and no
subtractive noise relative to the composed positional data.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .boxes import BoxSizeRange, gen_boxes, sample_partner_box
from .core import BoxR, ImageRaster, MaskStack, MultiLabel, RefMap, SoftLabel
from .errors import ConfigError, GeometryError

POLICIES = ("naive", "lp_map", "lp_xai")


@dataclass(frozen=True)
class LpConfig:
    """Label policy settings for the pairing engine.

    ``t_map`` is the minimum surviving-activation count used by the
    ``lp_xai`` read-out (strictly-greater comparison). ``map_smoothing``
    optionally applies the same minimum-count rule to reference-map
    read-out; it is off by default. ``p`` is the per-sample application
    probability used by the batch pipeline.
    """

    policy: str = "lp_map"
    t_map: int = 0
    p: float = 0.5
    map_smoothing: bool = False

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.t_map < 0:
            raise ConfigError("t_map must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("p must lie in [0, 1]")


@dataclass(frozen=True)
class Sample:
    """One dataset element: image, multi-label, optional positional data."""

    id: str
    image: ImageRaster
    label: MultiLabel
    ref_map: Optional[RefMap] = None
    masks: Optional[MaskStack] = None


@dataclass(frozen=True)
class Provenance:
    source_ids: tuple[str, str]
    box1: BoxR
    box2: BoxR
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.box1.same_shape(self.box2):
            raise GeometryError("provenance boxes must have equal dimensions")


@dataclass(frozen=True)
class AugmentedSample:
    """Result of one pairing: image plus exactly one label variant.

    ``ref_map``/``masks`` hold the composed positional data when the
    policy produced them, else None.
    """

    image: ImageRaster
    label: Union[MultiLabel, SoftLabel]
    provenance: Provenance
    ref_map: Optional[RefMap] = None
    masks: Optional[MaskStack] = None


def _check_pair_geometry(shape1, shape2, box1: BoxR, box2: BoxR) -> None:
    if shape1 != shape2:
        raise GeometryError(f"paired rasters differ in shape: {shape1} vs {shape2}")
    if not box1.same_shape(box2):
        raise GeometryError(
            f"boxes differ in shape: {box1.as_tuple()} vs {box2.as_tuple()}"
        )
    height, width = shape1[-2:]
    for box in (box1, box2):
        if not box.fits(height, width):
            raise GeometryError(
                f"box {box.as_tuple()} out of bounds for {height}x{width}"
            )


def _compose_arrays(a1: np.ndarray, a2: np.ndarray, box1: BoxR, box2: BoxR) -> np.ndarray:
    out = a1.copy()
    out[..., box1.rows, box1.cols] = a2[..., box2.rows, box2.cols]
    return out


def compose_image(x1: ImageRaster, x2: ImageRaster, box1: BoxR, box2: BoxR) -> ImageRaster:
    """Fill box1 of x1 with the box2 region of x2."""
    _check_pair_geometry(x1.data.shape, x2.data.shape, box1, box2)
    return ImageRaster(_compose_arrays(x1.data, x2.data, box1, box2))


def compose_map(m1: RefMap, m2: RefMap, box1: BoxR, box2: BoxR) -> RefMap:
    """Fill box1 of m1 with the box2 region of m2."""
    if m1.num_classes != m2.num_classes:
        raise GeometryError(
            f"maps declare different class counts: {m1.num_classes} vs {m2.num_classes}"
        )
    _check_pair_geometry(m1.data.shape, m2.data.shape, box1, box2)
    return RefMap(_compose_arrays(m1.data, m2.data, box1, box2), m1.num_classes)


def compose_masks(e1: MaskStack, e2: MaskStack, box1: BoxR, box2: BoxR) -> MaskStack:
    """Per-plane composition of two activation mask stacks."""
    _check_pair_geometry(e1.data.shape, e2.data.shape, box1, box2)
    return MaskStack(_compose_arrays(e1.data, e2.data, box1, box2))


def naive_label(
    y1: MultiLabel, y2: MultiLabel, box: BoxR, height: int, width: int
) -> SoftLabel:
    """Area-weighted soft mix: (1 - A) * y1 + A * y2 with A the box fraction."""
    if y1.num_classes != y2.num_classes:
        raise GeometryError(
            f"labels differ in length: {y1.num_classes} vs {y2.num_classes}"
        )
    if not box.fits(height, width):
        raise GeometryError(f"box {box.as_tuple()} out of bounds for {height}x{width}")
    area = box.area / (height * width)
    weights = (1.0 - area) * y1.bits + area * y2.bits
    return SoftLabel(weights)


def readout_phi(ref_map: RefMap, min_pixels: Optional[int] = None) -> MultiLabel:
    """Classes present in a reference map, as a multi-label.

    By default a class counts as present when it covers at least one
    pixel. When ``min_pixels`` is given, a class needs at least
    ``max(1, min_pixels)`` pixels instead. Void (0) is never emitted.
    """
    counts = np.bincount(ref_map.data.ravel(), minlength=ref_map.num_classes + 1)
    threshold = 1 if min_pixels is None else max(1, int(min_pixels))
    bits = (counts[1 : ref_map.num_classes + 1] >= threshold).astype(np.uint8)
    return MultiLabel(bits)


def readout_psi(masks: MaskStack, t_map: int) -> MultiLabel:
    """Classes whose activation count strictly exceeds ``t_map``.

    A plane with exactly ``t_map`` active pixels does not qualify.
    """
    if t_map < 0:
        raise ConfigError("t_map must be non-negative")
    counts = masks.data.reshape(masks.num_classes, -1).sum(axis=1, dtype=np.int64)
    return MultiLabel((counts > t_map).astype(np.uint8))


def augment(
    sample1: Sample,
    sample2: Sample,
    config: LpConfig,
    box_range: BoxSizeRange,
    rng: np.random.Generator,
) -> AugmentedSample:
    """Compose sample2 into sample1 under the configured label policy.

    Draws the cut box and the unaligned partner box from ``rng`` (the
    stream is consumed identically for every policy, so the augmented
    image depends only on the seed, never on the label policy).
    """
    height, width = sample1.image.height, sample1.image.width
    box1 = gen_boxes(box_range, 1, height, width, rng)[0]
    box2 = sample_partner_box(box1, height, width, rng)
    image = compose_image(sample1.image, sample2.image, box1, box2)

    ref_map = None
    masks = None
    flags: tuple[str, ...] = ()
    if config.policy == "naive":
        label: Union[MultiLabel, SoftLabel] = naive_label(
            sample1.label, sample2.label, box1, height, width
        )
    elif config.policy == "lp_map":
        if sample1.ref_map is None or sample2.ref_map is None:
            raise ConfigError("policy lp_map requires reference maps on both samples")
        ref_map = compose_map(sample1.ref_map, sample2.ref_map, box1, box2)
        min_pixels = config.t_map if config.map_smoothing else None
        label = readout_phi(ref_map, min_pixels)
    else:  # lp_xai
        if sample1.masks is None or sample2.masks is None:
            raise ConfigError("policy lp_xai requires mask stacks on both samples")
        masks = compose_masks(sample1.masks, sample2.masks, box1, box2)
        label = readout_psi(masks, config.t_map)

    if isinstance(label, MultiLabel) and not label.classes:
        flags = ("empty-label",)
    provenance = Provenance(
        source_ids=(sample1.id, sample2.id), box1=box1, box2=box2, flags=flags
    )
    return AugmentedSample(
        image=image, label=label, provenance=provenance, ref_map=ref_map, masks=masks
    )
