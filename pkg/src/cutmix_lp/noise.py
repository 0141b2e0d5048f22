"""Reference-map corruption generators for robustness studies.

Six kinds of positional noise, each applied to a chosen fraction of the
maps in a dataset:

  * ``mask_shift``         - translate the whole map, void filling the
                             exposed border;
  * ``dilation_erosion``   - morphologically grow or shrink one class;
  * ``rectify_borders``    - block-quantize the map by down/upsampling;
  * ``border_deformation`` - recolor small random boxes that straddle a
                             class border;
  * ``segment_swap``       - move one connected segment to a random
                             blob elsewhere in the map;
  * ``class_swap``         - relabel a fraction of all connected
                             segments with a different class (this one
                             also rewrites the image-level labels).

Segments are 4-connected components; morphology uses the matching 3x3
cross element. Kernels are pure per map. The suite derives one stream
per map from (seed, map index), so maps can be corrupted concurrently
without perturbing determinism, and selects exactly floor(f * N) maps
via a seeded shuffle.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import rng as rng_mod
from .core import MultiLabel, RefMap
from .errors import ConfigError, GeometryError
from .mixing import readout_phi

KINDS = (
    "mask_shift",
    "dilation_erosion",
    "rectify_borders",
    "border_deformation",
    "segment_swap",
    "class_swap",
)

# Kinds whose magnitude parameter is meaningful.
_MAGNITUDE_KINDS = {
    "mask_shift": "maximum shift in pixels",
    "dilation_erosion": "morphology iterations",
    "rectify_borders": "downsample factor",
    "border_deformation": "number of boxes",
}

CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# Eight compass directions as (d_row, d_col), clockwise from north.
_DIRECTIONS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_DIRECTION_NAMES = ("n", "ne", "e", "se", "s", "sw", "w", "nw")

# Box areas for border deformation, as fractions of the image area.
_DEFORM_AREA = (0.01, 0.05)


@dataclass(frozen=True)
class NoiseSpec:
    """One corruption setting: kind, affected fraction, magnitude."""

    kind: str
    fraction: float
    magnitude: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"noise kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ConfigError("fraction must lie in [0, 1]")
        if self.kind in _MAGNITUDE_KINDS:
            if self.magnitude is None:
                raise ConfigError(
                    f"{self.kind} requires a magnitude ({_MAGNITUDE_KINDS[self.kind]})"
                )
            floor = 1 if self.kind in ("mask_shift", "rectify_borders") else 0
            if self.magnitude < floor:
                raise ConfigError(f"magnitude for {self.kind} must be >= {floor}")
        elif self.magnitude is not None:
            raise ConfigError(f"{self.kind} takes no magnitude parameter")


def _translate(data: np.ndarray, d_row: int, d_col: int) -> np.ndarray:
    out = np.zeros_like(data)
    h, w = data.shape
    out[max(d_row, 0) : h + min(d_row, 0), max(d_col, 0) : w + min(d_col, 0)] = data[
        max(-d_row, 0) : h + min(-d_row, 0), max(-d_col, 0) : w + min(-d_col, 0)
    ]
    return out


def _mask_shift(ref_map: RefMap, max_shift: int, rng) -> tuple[RefMap, dict]:
    if not 1 <= max_shift < min(ref_map.height, ref_map.width):
        raise ConfigError(
            f"max_shift must lie in [1, min(H, W)), got {max_shift} for "
            f"{ref_map.height}x{ref_map.width}"
        )
    direction = int(rng.integers(0, len(_DIRECTIONS)))
    shift = int(rng.integers(1, max_shift + 1))
    d_row, d_col = (d * shift for d in _DIRECTIONS[direction])
    out = RefMap(_translate(ref_map.data, d_row, d_col), ref_map.num_classes)
    return out, {"direction": _DIRECTION_NAMES[direction], "shift": shift}


def mask_shift(ref_map: RefMap, max_shift: int, rng) -> RefMap:
    """Translate the map by 1..max_shift pixels in a random compass direction."""
    return _mask_shift(ref_map, max_shift, rng)[0]


def _majority_border_class(
    data: np.ndarray, region: np.ndarray, exclude: int
) -> int:
    """Most frequent non-void class on the outer boundary of ``region``.

    Returns 0 (void) when no other class touches the region. Ties break
    toward the smallest class id.
    """
    ring = ndimage.binary_dilation(region, structure=CROSS) & ~region
    values = data[ring]
    values = values[(values != 0) & (values != exclude)]
    if values.size == 0:
        return 0
    counts = np.bincount(values)
    return int(counts.argmax())


def _dilate_erode(ref_map: RefMap, iterations: int, rng) -> tuple[RefMap, dict]:
    if iterations < 0:
        raise ConfigError("iterations must be non-negative")
    present = ref_map.present_classes()
    if not present:
        raise ConfigError("map has no non-void class to dilate or erode")
    chosen = int(present[int(rng.integers(0, len(present)))])
    dilate = bool(rng.integers(0, 2))
    record = {"class": chosen, "op": "dilate" if dilate else "erode", "iterations": iterations}
    if iterations == 0:
        return ref_map, record

    data = ref_map.data
    mask = data == chosen
    out = data.copy()
    if dilate:
        grown = ndimage.binary_dilation(mask, structure=CROSS, iterations=iterations)
        out[grown] = chosen
    else:
        # border_value=1 keeps the image edge from eroding; only real
        # class borders recede.
        shrunk = ndimage.binary_erosion(
            mask, structure=CROSS, iterations=iterations, border_value=1
        )
        fill = _majority_border_class(data, mask, exclude=chosen)
        out[mask & ~shrunk] = fill
        record["fill"] = fill
    return RefMap(out, ref_map.num_classes), record


def dilate_erode(ref_map: RefMap, iterations: int, rng) -> RefMap:
    """Dilate or erode (fair coin) one uniformly chosen class."""
    return _dilate_erode(ref_map, iterations, rng)[0]


def rectify_borders(ref_map: RefMap, factor: int) -> RefMap:
    """Nearest-neighbor downsample by ``factor`` and resize back.

    The output is constant on factor-aligned blocks, each taking the
    value of its top-left source pixel.
    """
    if factor < 1:
        raise ConfigError("factor must be at least 1")
    if factor > min(ref_map.height, ref_map.width):
        raise ConfigError(
            f"factor {factor} exceeds map size {ref_map.height}x{ref_map.width}"
        )
    if factor == 1:
        return ref_map
    sub = ref_map.data[::factor, ::factor]
    up = sub.repeat(factor, axis=0).repeat(factor, axis=1)
    up = up[: ref_map.height, : ref_map.width]
    return RefMap(up, ref_map.num_classes)


def _border_deformation(ref_map: RefMap, n_boxes: int, rng) -> tuple[RefMap, dict]:
    if n_boxes < 0:
        raise ConfigError("n_boxes must be non-negative")
    h, w = ref_map.height, ref_map.width
    total = h * w
    data = ref_map.data.copy()
    placed = []
    for _ in range(n_boxes):
        target = max(1, int(round(rng.uniform(*_DEFORM_AREA) * total)))
        aspect = float(rng.uniform(0.5, 2.0))
        bh = min(h, max(1, int(round((target * aspect) ** 0.5))))
        bw = min(w, max(1, int(round(target / bh))))
        top = int(rng.integers(0, h - bh + 1))
        left = int(rng.integers(0, w - bw + 1))
        region = data[top : top + bh, left : left + bw]
        classes = np.unique(region)
        classes = classes[classes != 0]
        entry = {"box": [top, left, top + bh, left + bw]}
        if classes.size >= 2:
            chosen = int(classes[int(rng.integers(0, classes.size))])
            region[...] = chosen
            entry["class"] = chosen
        placed.append(entry)
    return RefMap(data, ref_map.num_classes), {"boxes": placed}


def border_deformation(ref_map: RefMap, n_boxes: int, rng) -> RefMap:
    """Recolor random small boxes that straddle at least two classes.

    Each box covers 1-5% of the image area. A box lying inside a single
    segment leaves the map unchanged.
    """
    return _border_deformation(ref_map, n_boxes, rng)[0]


def _grow_blob(
    height: int, width: int, seed_pixel: tuple[int, int], count: int, rng
) -> np.ndarray:
    """Connected random-walk blob of exactly ``count`` pixels."""
    blob = np.zeros((height, width), dtype=bool)
    blob[seed_pixel] = True
    frontier = set()

    def neighbors(r, c):
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width and not blob[rr, cc]:
                yield rr, cc

    frontier.update(neighbors(*seed_pixel))
    size = 1
    while size < count and frontier:
        ordered = sorted(frontier)
        pick = ordered[int(rng.integers(0, len(ordered)))]
        frontier.remove(pick)
        blob[pick] = True
        size += 1
        frontier.update(neighbors(*pick))
    return blob


def _segment_swap(ref_map: RefMap, rng) -> tuple[RefMap, dict]:
    present = ref_map.present_classes()
    if len(present) < 2:
        raise ConfigError("segment swap needs at least two classes in the map")
    data = ref_map.data
    segments = []  # (class, component mask)
    for cls in present:
        labeled, n = ndimage.label(data == cls, structure=CROSS)
        for j in range(1, n + 1):
            segments.append((cls, labeled == j))
    cls, seg = segments[int(rng.integers(0, len(segments)))]
    fill = _majority_border_class(data, seg, exclude=cls)
    count = int(seg.sum())
    seed_pixel = (int(rng.integers(0, ref_map.height)), int(rng.integers(0, ref_map.width)))
    blob = _grow_blob(ref_map.height, ref_map.width, seed_pixel, count, rng)
    out = data.copy()
    out[seg] = fill
    out[blob] = cls
    record = {"class": cls, "pixels": count, "fill": fill, "seed_pixel": list(seed_pixel)}
    return RefMap(out, ref_map.num_classes), record


def segment_swap(ref_map: RefMap, rng) -> RefMap:
    """Move one connected class segment to a random blob elsewhere."""
    return _segment_swap(ref_map, rng)[0]


def class_swap(
    maps: Sequence[RefMap],
    labels: Sequence[MultiLabel],
    fraction: float,
    rng,
) -> tuple[list[RefMap], list[MultiLabel]]:
    """Reassign a fraction of all connected segments to a new class.

    Image-level labels are recomputed from the corrupted maps.
    """
    new_maps, new_labels, _ = _class_swap_all(maps, labels, fraction, [rng] * len(maps))
    return new_maps, new_labels


def _class_swap_all(
    maps: Sequence[RefMap],
    labels: Sequence[MultiLabel],
    fraction: float,
    streams: Sequence,
) -> tuple[list[RefMap], list[MultiLabel], list[tuple[int, dict]]]:
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("fraction must lie in [0, 1]")
    if len(maps) != len(labels):
        raise GeometryError("maps and labels differ in length")
    records: list[tuple[int, dict]] = []
    new_maps: list[RefMap] = []
    for idx, (ref_map, rng) in enumerate(zip(maps, streams)):
        num_classes = ref_map.num_classes
        if fraction > 0.0 and num_classes < 2:
            raise ConfigError("class swap needs at least two classes in the nomenclature")
        data = ref_map.data
        # Census on the clean map; swaps applied afterwards so segment
        # boundaries never depend on earlier swaps.
        swaps = []
        for cls in ref_map.present_classes():
            labeled, n = ndimage.label(data == cls, structure=CROSS)
            for j in range(1, n + 1):
                if float(rng.random()) < fraction:
                    draw = int(rng.integers(1, num_classes))
                    new_cls = draw if draw < cls else draw + 1
                    swaps.append((cls, j, labeled == j, new_cls))
        if swaps:
            out = data.copy()
            for cls, j, seg, new_cls in swaps:
                out[seg] = new_cls
                records.append(
                    (idx, {"class": cls, "segment": j, "new_class": new_cls,
                           "pixels": int(seg.sum())})
                )
            new_maps.append(RefMap(out, num_classes))
        else:
            new_maps.append(ref_map)
    new_labels = [readout_phi(m) for m in new_maps]
    return new_maps, new_labels, records


@dataclass(frozen=True)
class NoiseResult:
    """Corrupted dataset plus the per-map corruption manifest."""

    maps: list[RefMap]
    labels: list[MultiLabel]
    records: list[dict]


def apply_noise_suite(
    dataset: Sequence[tuple[str, RefMap, MultiLabel]],
    spec: NoiseSpec,
    seed: int,
) -> NoiseResult:
    """Corrupt exactly floor(fraction * N) maps of ``dataset``.

    Map selection uses a seeded shuffle, so the paper-style 25/50/100%
    settings are reproduced exactly. Each record names the map id, the
    noise kind, and every randomly drawn parameter. ``class_swap``
    operates on segments across the whole dataset instead of selecting
    maps, and additionally rewrites the labels.
    """
    ids = [s[0] for s in dataset]
    maps = [s[1] for s in dataset]
    labels = [s[2] for s in dataset]
    n = len(dataset)
    records: list[dict] = []

    if spec.kind == "class_swap":
        streams = [rng_mod.stream(seed, rng_mod.NOISE_MAP, i) for i in range(n)]
        new_maps, new_labels, raw = _class_swap_all(maps, labels, spec.fraction, streams)
        for idx, params in raw:
            records.append({"id": ids[idx], "kind": spec.kind, "params": params})
        return NoiseResult(new_maps, new_labels, records)

    k = int(np.floor(spec.fraction * n))
    order = rng_mod.stream(seed, rng_mod.NOISE_SELECT).permutation(n)
    chosen = set(int(i) for i in order[:k])
    new_maps = list(maps)
    for i in sorted(chosen):
        map_rng = rng_mod.stream(seed, rng_mod.NOISE_MAP, i)
        if spec.kind == "mask_shift":
            new_maps[i], params = _mask_shift(maps[i], spec.magnitude, map_rng)
        elif spec.kind == "dilation_erosion":
            new_maps[i], params = _dilate_erode(maps[i], spec.magnitude, map_rng)
        elif spec.kind == "rectify_borders":
            new_maps[i] = rectify_borders(maps[i], spec.magnitude)
            params = {"factor": spec.magnitude}
        elif spec.kind == "border_deformation":
            new_maps[i], params = _border_deformation(maps[i], spec.magnitude, map_rng)
        else:  # segment_swap
            new_maps[i], params = _segment_swap(maps[i], map_rng)
        records.append({"id": ids[i], "kind": spec.kind, "params": params})
    return NoiseResult(new_maps, list(labels), records)


@dataclass(frozen=True)
class MapIou:
    """Per-class intersection over union between two maps."""

    per_class: dict[int, float]
    mean: float


def map_iou(clean: RefMap, noisy: RefMap) -> MapIou:
    """IoU per class over pixel sets; classes absent from both are skipped."""
    if clean.data.shape != noisy.data.shape:
        raise GeometryError(
            f"maps differ in shape: {clean.data.shape} vs {noisy.data.shape}"
        )
    classes = sorted(set(clean.present_classes()) | set(noisy.present_classes()))
    per_class = {}
    for cls in classes:
        a = clean.data == cls
        b = noisy.data == cls
        union = int((a | b).sum())
        per_class[cls] = float((a & b).sum() / union)
    mean = float(np.mean(list(per_class.values()))) if per_class else 1.0
    return MapIou(per_class=per_class, mean=mean)
