"""Bit-exact on-disk formats.

Raw tensor format (RTEN), designed for byte-identical round-trips
across languages:

    magic   4 bytes  b"RTEN"
    version 1 byte   currently 1
    dtype   1 byte   0 = uint8, 1 = float32 little-endian
    rank    1 byte
    dims    rank x u32 little-endian
    payload row-major element bytes

Image rasters are additionally importable from 8-bit PNG (1-4 channels)
and reference maps from single-channel 8/16-bit PNG.

Labels are stored as line-delimited text, one record per line:

    <id> TAB <comma-separated sorted class ids, empty for no classes>
"""

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadMagicError,
    DimOverflowError,
    ManifestError,
    RtenError,
    TruncatedPayloadError,
)

MAGIC = b"RTEN"
VERSION = 1
_DTYPE_CODES = {0: np.dtype(np.uint8), 1: np.dtype("<f4")}
_CODE_FOR_KIND = {np.dtype(np.uint8): 0, np.dtype("<f4"): 1}
_MAX_RANK = 8
_MAX_PAYLOAD = 1 << 40


def rten_bytes(array: np.ndarray) -> bytes:
    """RTEN encoding of ``array`` (uint8 or float32) as a bytes object."""
    array = np.ascontiguousarray(array)
    if array.dtype == np.float32:
        array = array.astype("<f4", copy=False)
    code = _CODE_FOR_KIND.get(array.dtype)
    if code is None:
        raise RtenError(f"RTEN stores uint8 or float32, got {array.dtype}")
    if array.ndim > _MAX_RANK:
        raise RtenError(f"rank {array.ndim} exceeds maximum {_MAX_RANK}")
    for dim in array.shape:
        if dim >= 1 << 32:
            raise DimOverflowError(f"dimension {dim} does not fit in u32")
    header = MAGIC + struct.pack("<BBB", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + array.tobytes()


def write_rten(path, array: np.ndarray) -> None:
    """Write ``array`` in RTEN format."""
    Path(path).write_bytes(rten_bytes(array))


def read_rten(path) -> np.ndarray:
    """Read an RTEN file back into a numpy array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return rten_from_bytes(blob, name=str(path))


def rten_from_bytes(blob: bytes, name: str = "<bytes>") -> np.ndarray:
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{name}: not an RTEN file (bad magic)")
    if len(blob) < 7:
        raise TruncatedPayloadError(f"{name}: truncated header")
    version, code, rank = struct.unpack_from("<BBB", blob, 4)
    if version != VERSION:
        raise RtenError(f"{name}: unsupported RTEN version {version}")
    if code not in _DTYPE_CODES:
        raise RtenError(f"{name}: unknown dtype code {code}")
    if rank > _MAX_RANK:
        raise DimOverflowError(f"{name}: rank {rank} exceeds maximum {_MAX_RANK}")
    offset = 7
    if len(blob) < offset + 4 * rank:
        raise TruncatedPayloadError(f"{name}: truncated dimension list")
    dims = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    dtype = _DTYPE_CODES[code]
    count = 1
    for dim in dims:
        count *= dim
    if count * dtype.itemsize > _MAX_PAYLOAD:
        raise DimOverflowError(f"{name}: payload of {count} elements is implausible")
    expected = count * dtype.itemsize
    payload = blob[offset:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{name}: truncated payload ({len(payload)} of {expected} bytes)"
        )
    if len(payload) > expected:
        raise RtenError(f"{name}: {len(payload) - expected} trailing bytes")
    array = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return array.copy()


def read_image_png(path) -> np.ndarray:
    """Decode an 8-bit PNG into a C x H x W uint8 array."""
    with Image.open(path) as img:
        if img.mode == "P":
            img = img.convert("RGB")
        if img.mode not in ("L", "LA", "RGB", "RGBA"):
            raise ManifestError(
                f"{path}: unsupported PNG mode {img.mode!r} for an image raster"
            )
        data = np.asarray(img, dtype=np.uint8)
    if data.ndim == 2:
        data = data[None, :, :]
    else:
        data = np.moveaxis(data, -1, 0)
    return data


def read_map_png(path) -> np.ndarray:
    """Decode a single-channel 8/16-bit PNG into an H x W integer array."""
    with Image.open(path) as img:
        if img.mode == "L":
            data = np.asarray(img, dtype=np.uint8)
        elif img.mode in ("I", "I;16"):
            data = np.asarray(img, dtype=np.int32)
        else:
            raise ManifestError(
                f"{path}: map PNG must be single-channel 8/16-bit, got mode {img.mode!r}"
            )
    if data.ndim != 2:
        raise ManifestError(f"{path}: map PNG must be single-channel")
    return data


def write_labels(path, records) -> None:
    """Write (id, class ids) records as line-delimited text."""
    lines = []
    for sample_id, classes in records:
        if "\t" in sample_id or "\n" in sample_id:
            raise ManifestError(f"sample id {sample_id!r} contains separators")
        lines.append(f"{sample_id}\t{','.join(str(c) for c in sorted(classes))}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_labels(path) -> list[tuple[str, tuple[int, ...]]]:
    records = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ManifestError(f"{path}:{lineno}: expected '<id>\\t<classes>'")
        sample_id, _, rest = line.partition("\t")
        classes = tuple(int(tok) for tok in rest.split(",") if tok.strip())
        records.append((sample_id, classes))
    return records


def write_soft_labels(path, records) -> None:
    """Write (id, weight vector) records, weights with full float precision."""
    lines = []
    for sample_id, weights in records:
        rendered = ",".join(repr(float(w)) for w in weights)
        lines.append(f"{sample_id}\t{rendered}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
