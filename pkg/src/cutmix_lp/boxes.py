"""Constrained random box generation.

Boxes are produced by rejection sampling: both row corners are drawn
uniformly from the inclusive integer range [0, H] and both column
corners from [0, W], min/max-ordered, and kept only when the resulting
normalized area falls inside the configured range. Degenerate zero-area
draws always fail the area test and are resampled.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import BoxR
from .errors import ConfigError, GeometryError

MAX_ATTEMPTS = 10**6
_CHUNK = 256


@dataclass(frozen=True)
class BoxSizeRange:
    """Allowed box area as a fraction of the image area."""

    a_min: float
    a_max: float

    def __post_init__(self):
        if not 0.0 < self.a_min <= self.a_max <= 1.0:
            raise ConfigError(
                f"box size range must satisfy 0 < a_min <= a_max <= 1, "
                f"got ({self.a_min}, {self.a_max})"
            )


@lru_cache(maxsize=256)
def _feasible(a_min: float, a_max: float, height: int, width: int) -> bool:
    total = height * width
    for bh in range(1, height + 1):
        lo = math.ceil(a_min * total / bh)
        hi = math.floor(a_max * total / bh)
        if max(lo, 1) <= min(hi, width):
            return True
    return False


def gen_boxes(
    box_range: BoxSizeRange,
    count: int,
    height: int,
    width: int,
    rng: np.random.Generator,
) -> list[BoxR]:
    """Draw ``count`` boxes whose normalized areas fall in ``box_range``."""
    if count < 1:
        raise ConfigError("count must be at least 1")
    if height < 1 or width < 1:
        raise GeometryError("image dimensions must be positive")
    if not _feasible(box_range.a_min, box_range.a_max, height, width):
        raise ConfigError(
            f"no integer box on a {height}x{width} grid has normalized area in "
            f"[{box_range.a_min}, {box_range.a_max}]"
        )

    total = float(height * width)
    boxes: list[BoxR] = []
    attempts = 0
    while len(boxes) < count:
        if attempts >= MAX_ATTEMPTS:
            raise ConfigError(
                f"box sampling exceeded {MAX_ATTEMPTS} attempts: accepted "
                f"{len(boxes)}/{count} for range ({box_range.a_min}, "
                f"{box_range.a_max}) on {height}x{width}"
            )
        chunk = min(_CHUNK, MAX_ATTEMPTS - attempts)
        rows = rng.integers(0, height + 1, size=(chunk, 2))
        cols = rng.integers(0, width + 1, size=(chunk, 2))
        attempts += chunk
        r_a = rows.min(axis=1)
        r_c = rows.max(axis=1)
        r_b = cols.min(axis=1)
        r_d = cols.max(axis=1)
        area = (r_c - r_a) * (r_d - r_b) / total
        keep = (area >= box_range.a_min) & (area <= box_range.a_max)
        for i in np.flatnonzero(keep):
            boxes.append(BoxR(r_a[i], r_b[i], r_c[i], r_d[i]))
            if len(boxes) == count:
                break
    return boxes


def sample_partner_box(
    box: BoxR, height: int, width: int, rng: np.random.Generator
) -> BoxR:
    """Same-sized box at a uniformly random position in the image."""
    if not box.fits(height, width):
        raise GeometryError(f"box {box.as_tuple()} out of bounds for {height}x{width}")
    top = int(rng.integers(0, height - box.height + 1))
    left = int(rng.integers(0, width - box.width + 1))
    return BoxR(top, left, top + box.height, left + box.width)
