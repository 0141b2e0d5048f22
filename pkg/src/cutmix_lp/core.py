"""Core value types for rasters, labels, maps, masks, and boxes.

All types are immutable after construction: the wrapped numpy arrays are
stored as read-only views, so instances can be shared freely across
threads. Every operation in this package is a pure function over these
types.

Conventions:
  * images are C x H x W, reference maps H x W, mask stacks L x H x W;
  * boxes are half-open pixel ranges [r_a, r_c) x [r_b, r_d), so the
    number of covered pixels equals (r_c - r_a) * (r_d - r_b);
  * class ids are 1-based; map value 0 is reserved for void/unlabeled
    pixels and is never emitted by label read-out.
"""

from dataclasses import dataclass, field
import numpy as np

from .errors import GeometryError

IMAGE_DTYPES = (np.uint8, np.float32)


def _readonly(data: np.ndarray) -> np.ndarray:
    view = data.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class MultiLabel:
    """Binary presence vector over the dataset's classes."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size == 0:
            raise GeometryError("label must be a non-empty 1-d bit vector")
        if bits.max(initial=0) > 1:
            raise GeometryError("label entries must be 0 or 1")
        object.__setattr__(self, "bits", _readonly(bits))

    @classmethod
    def from_classes(cls, classes, num_classes: int) -> "MultiLabel":
        """Build a label from 1-based class ids."""
        bits = np.zeros(num_classes, dtype=np.uint8)
        for c in classes:
            if not 1 <= c <= num_classes:
                raise GeometryError(f"class id {c} outside 1..{num_classes}")
            bits[c - 1] = 1
        return cls(bits)

    @property
    def num_classes(self) -> int:
        return int(self.bits.size)

    @property
    def classes(self) -> tuple[int, ...]:
        """Present classes as sorted 1-based ids."""
        return tuple(int(i) + 1 for i in np.flatnonzero(self.bits))

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiLabel) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.bits.tobytes(), self.bits.size))


@dataclass(frozen=True)
class SoftLabel:
    """Per-class weights in [0, 1], produced by area-weighted label mixing."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise GeometryError("soft label must be a non-empty 1-d vector")
        if w.min(initial=0.0) < 0.0 or w.max(initial=0.0) > 1.0:
            raise GeometryError("soft label weights must lie in [0, 1]")
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def num_classes(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, SoftLabel) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True)
class ImageRaster:
    """C x H x W pixel grid, 8-bit unsigned or 32-bit float."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise GeometryError(f"image must be C x H x W, got shape {data.shape}")
        if data.dtype not in IMAGE_DTYPES:
            raise GeometryError(f"image dtype must be uint8 or float32, got {data.dtype}")
        if 0 in data.shape:
            raise GeometryError("image dimensions must be positive")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageRaster) and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class RefMap:
    """H x W raster of class ids in [0, num_classes]; 0 means void."""

    data: np.ndarray
    num_classes: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or 0 in data.shape:
            raise GeometryError(f"reference map must be H x W, got shape {data.shape}")
        if data.dtype.kind not in "iu":
            raise GeometryError(f"reference map dtype must be integer, got {data.dtype}")
        if self.num_classes < 1:
            raise GeometryError("num_classes must be positive")
        if data.min() < 0 or data.max() > self.num_classes:
            raise GeometryError(
                f"map entries must lie in [0, {self.num_classes}]"
            )
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def present_classes(self) -> tuple[int, ...]:
        """Sorted 1-based ids of classes with at least one pixel."""
        values = np.unique(self.data)
        return tuple(int(v) for v in values if v != 0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RefMap)
            and self.num_classes == other.num_classes
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


@dataclass(frozen=True)
class MaskStack:
    """L x H x W binary grid of per-class activation masks.

    Planes may overlap: a pixel can activate several classes at once.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype == bool:
            data = data.astype(np.uint8)
        if data.ndim != 3 or 0 in data.shape:
            raise GeometryError(f"mask stack must be L x H x W, got shape {data.shape}")
        if data.dtype.kind not in "iu":
            raise GeometryError(f"mask stack dtype must be integer, got {data.dtype}")
        if data.min() < 0 or data.max() > 1:
            raise GeometryError("mask stack entries must be 0 or 1")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, MaskStack) and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class Heatmap:
    """L x H x W grid of per-class relevance scores in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or 0 in data.shape:
            raise GeometryError(f"heatmap must be L x H x W, got shape {data.shape}")
        if data.dtype.kind != "f":
            raise GeometryError(f"heatmap dtype must be float, got {data.dtype}")
        if data.min() < 0.0 or data.max() > 1.0:
            raise GeometryError("heatmap values must lie in [0, 1]")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, Heatmap) and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class BoxR:
    """Axis-aligned pixel rectangle [r_a, r_c) x [r_b, r_d).

    r_a/r_c bound rows (height axis), r_b/r_d bound columns (width axis).
    """

    r_a: int
    r_b: int
    r_c: int
    r_d: int

    def __post_init__(self):
        for name in ("r_a", "r_b", "r_c", "r_d"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.r_a < 0 or self.r_b < 0:
            raise GeometryError(f"box corners must be non-negative: {self}")
        if self.r_a >= self.r_c or self.r_b >= self.r_d:
            raise GeometryError(f"box must have positive extent: {self}")

    @property
    def height(self) -> int:
        return self.r_c - self.r_a

    @property
    def width(self) -> int:
        return self.r_d - self.r_b

    @property
    def area(self) -> int:
        return self.height * self.width

    @property
    def rows(self) -> slice:
        return slice(self.r_a, self.r_c)

    @property
    def cols(self) -> slice:
        return slice(self.r_b, self.r_d)

    def fits(self, height: int, width: int) -> bool:
        return self.r_c <= height and self.r_d <= width

    def same_shape(self, other: "BoxR") -> bool:
        return self.height == other.height and self.width == other.width

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.r_a, self.r_b, self.r_c, self.r_d)


def _check_box(box: BoxR, height: int, width: int) -> None:
    if not box.fits(height, width):
        raise GeometryError(f"box {box.as_tuple()} out of bounds for {height}x{width}")


def binary_mask(box: BoxR, height: int, width: int) -> np.ndarray:
    """H x W grid that is 1 exactly on the pixels covered by ``box``."""
    _check_box(box, height, width)
    mask = np.zeros((height, width), dtype=np.uint8)
    mask[box.rows, box.cols] = 1
    return mask


def _shift_array(data: np.ndarray, src_box: BoxR, dst_box: BoxR) -> np.ndarray:
    if not src_box.same_shape(dst_box):
        raise GeometryError(
            f"source box {src_box.as_tuple()} and destination box "
            f"{dst_box.as_tuple()} differ in shape"
        )
    height, width = data.shape[-2:]
    _check_box(src_box, height, width)
    _check_box(dst_box, height, width)
    out = np.zeros_like(data)
    out[..., dst_box.rows, dst_box.cols] = data[..., src_box.rows, src_box.cols]
    return out


def shift_box_content(src, src_box: BoxR, dst_box: BoxR):
    """Move the src_box region of ``src`` to dst_box; zero everywhere else.

    Acts channel-wise on images, plane-wise on mask stacks, and directly
    on 2-d maps. Accepts raw arrays (last two axes are H, W) or the
    wrapper types, returning the same kind it was given.
    """
    if isinstance(src, ImageRaster):
        return ImageRaster(_shift_array(src.data, src_box, dst_box))
    if isinstance(src, RefMap):
        return RefMap(_shift_array(src.data, src_box, dst_box), src.num_classes)
    if isinstance(src, MaskStack):
        return MaskStack(_shift_array(src.data, src_box, dst_box))
    data = np.asarray(src)
    if data.ndim < 2:
        raise GeometryError("shift requires at least a 2-d raster")
    return _shift_array(data, src_box, dst_box)


@dataclass(frozen=True)
class PairReport:
    """Consistency findings for a (reference map, multi-label) pair."""

    unlabeled_in_map: tuple[int, ...] = field(default=())
    missing_pixels: tuple[int, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.unlabeled_in_map and not self.missing_pixels

    def messages(self) -> list[str]:
        out = []
        for c in self.unlabeled_in_map:
            out.append(f"class {c} appears in the map but is unlabeled at image level")
        for c in self.missing_pixels:
            out.append(f"class {c} is labeled but has no pixels in the map")
        return out


def validate_pair(ref_map: RefMap, label: MultiLabel) -> PairReport:
    """Report classes present in only one of map and label."""
    if ref_map.num_classes != label.num_classes:
        raise GeometryError(
            f"map declares {ref_map.num_classes} classes, label {label.num_classes}"
        )
    map_classes = set(ref_map.present_classes())
    label_classes = set(label.classes)
    return PairReport(
        unlabeled_in_map=tuple(sorted(map_classes - label_classes)),
        missing_pixels=tuple(sorted(label_classes - map_classes)),
    )
