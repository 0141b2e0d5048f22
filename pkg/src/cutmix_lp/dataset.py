"""Dataset manifests: parsing, validation, lazy sample access, writing.

A manifest is a JSON file:

    {
      "classes": ["urban", "water", ...],
      "geometry": {"channels": 3, "height": 120, "width": 120, "dtype": "u8"},
      "samples": [
        {"id": "s0001", "image": "images/s0001.rten", "labels": [1, 3],
         "map": "maps/s0001.rten",            # optional
         "masks": "masks/s0001.rten",         # optional, binary stack
         "heatmaps": "heat/s0001.rten"}       # optional, float stack
      ]
    }

Paths are resolved relative to the manifest's directory. Image files
may be RTEN or 8-bit PNG; map files RTEN or single-channel 8/16-bit
PNG; mask and heatmap stacks are RTEN only. Heatmap stacks are
thresholded into activation masks at load time using the dataset's
``t_cam``, with planes of absent classes forced to zero.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .cam import threshold_heatmaps
from .core import Heatmap, ImageRaster, MaskStack, MultiLabel, PairReport, RefMap, validate_pair
from .errors import CutmixLpError, ManifestError
from .formats import read_image_png, read_map_png, read_rten, write_labels, write_rten
from .mixing import Sample

_DTYPES = {"u8": np.uint8, "f32": np.float32}


@dataclass(frozen=True)
class Geometry:
    channels: int
    height: int
    width: int
    dtype: str

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise ManifestError(f"geometry dtype must be one of {sorted(_DTYPES)}")
        if min(self.channels, self.height, self.width) < 1:
            raise ManifestError("geometry dimensions must be positive")

    @property
    def numpy_dtype(self):
        return _DTYPES[self.dtype]


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image: str
    labels: tuple[int, ...]
    map: Optional[str] = None
    masks: Optional[str] = None
    heatmaps: Optional[str] = None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    class_names: tuple[str, ...]
    geometry: Geometry
    records: tuple[SampleRecord, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def _parse_manifest(path: Path) -> DatasetManifest:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    except OSError as exc:
        raise ManifestError(f"{path}: {exc}")

    try:
        classes = tuple(str(c) for c in raw["classes"])
        geometry = Geometry(**raw["geometry"])
        samples = raw["samples"]
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: missing or malformed field: {exc}")
    if not classes:
        raise ManifestError(f"{path}: empty class list")
    if not samples:
        raise ManifestError(f"{path}: no samples")

    records = []
    seen = set()
    for i, entry in enumerate(samples):
        try:
            rec = SampleRecord(
                id=str(entry["id"]),
                image=str(entry["image"]),
                labels=tuple(int(c) for c in entry["labels"]),
                map=entry.get("map"),
                masks=entry.get("masks"),
                heatmaps=entry.get("heatmaps"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: sample #{i}: {exc}")
        if rec.id in seen:
            raise ManifestError(f"{path}: duplicate sample id {rec.id!r}")
        seen.add(rec.id)
        for c in rec.labels:
            if not 1 <= c <= len(classes):
                raise ManifestError(
                    f"{path}: sample {rec.id!r}: class {c} outside 1..{len(classes)}"
                )
        if rec.masks and rec.heatmaps:
            raise ManifestError(
                f"{path}: sample {rec.id!r}: give either masks or heatmaps, not both"
            )
        records.append(rec)
    return DatasetManifest(
        root=path.parent, class_names=classes, geometry=geometry, records=tuple(records)
    )


class Dataset:
    """Validated dataset with lazy, per-call sample loading."""

    def __init__(self, manifest: DatasetManifest, t_cam: float, warnings):
        self.manifest = manifest
        self.t_cam = t_cam
        self.warnings: list[tuple[str, PairReport]] = warnings
        self._index = {rec.id: i for i, rec in enumerate(manifest.records)}

    def __len__(self) -> int:
        return len(self.manifest.records)

    def __getitem__(self, i: int) -> Sample:
        return self._load(self.manifest.records[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def get(self, sample_id: str) -> Sample:
        return self[self._index[sample_id]]

    @property
    def num_classes(self) -> int:
        return self.manifest.num_classes

    def _resolve(self, rel: str) -> Path:
        return self.manifest.root / rel

    def _load(self, rec: SampleRecord) -> Sample:
        geo = self.manifest.geometry
        num_classes = self.manifest.num_classes
        image_path = self._resolve(rec.image)
        if image_path.suffix == ".png":
            data = read_image_png(image_path)
        else:
            data = read_rten(image_path)
        if data.ndim != 3 or data.shape != (geo.channels, geo.height, geo.width):
            raise ManifestError(
                f"sample {rec.id!r}: image shape {data.shape} does not match "
                f"declared ({geo.channels}, {geo.height}, {geo.width})"
            )
        if data.dtype != geo.numpy_dtype:
            raise ManifestError(
                f"sample {rec.id!r}: image dtype {data.dtype} does not match "
                f"declared {geo.dtype}"
            )
        image = ImageRaster(data)
        label = MultiLabel.from_classes(rec.labels, num_classes)

        ref_map = None
        if rec.map:
            map_path = self._resolve(rec.map)
            if map_path.suffix == ".png":
                raw = read_map_png(map_path)
            else:
                raw = read_rten(map_path)
            if raw.ndim != 2 or raw.shape != (geo.height, geo.width):
                raise ManifestError(
                    f"sample {rec.id!r}: map shape {raw.shape} does not match "
                    f"declared ({geo.height}, {geo.width})"
                )
            if raw.max(initial=0) > num_classes:
                raise ManifestError(
                    f"sample {rec.id!r}: map value {int(raw.max())} exceeds "
                    f"class count {num_classes}"
                )
            ref_map = RefMap(raw, num_classes)

        masks = None
        if rec.masks:
            raw = read_rten(self._resolve(rec.masks))
            if raw.shape != (num_classes, geo.height, geo.width):
                raise ManifestError(
                    f"sample {rec.id!r}: mask stack shape {raw.shape} does not "
                    f"match ({num_classes}, {geo.height}, {geo.width})"
                )
            masks = MaskStack(raw)
        elif rec.heatmaps:
            raw = read_rten(self._resolve(rec.heatmaps))
            if raw.shape != (num_classes, geo.height, geo.width):
                raise ManifestError(
                    f"sample {rec.id!r}: heatmap stack shape {raw.shape} does not "
                    f"match ({num_classes}, {geo.height}, {geo.width})"
                )
            try:
                heat = Heatmap(raw)
            except CutmixLpError as exc:
                raise ManifestError(f"sample {rec.id!r}: {exc}")
            masks = threshold_heatmaps(heat, label, self.t_cam)

        return Sample(id=rec.id, image=image, label=label, ref_map=ref_map, masks=masks)


def load_dataset(manifest_path, t_cam: float = 0.1) -> Dataset:
    """Parse, fully validate, and wrap a dataset manifest.

    Every sample is read once up front so geometry and value-range
    violations surface immediately, naming the offending id. Map/label
    consistency findings are collected as warnings, not errors.
    """
    manifest = _parse_manifest(Path(manifest_path))
    dataset = Dataset(manifest, t_cam, warnings=[])
    for i, rec in enumerate(manifest.records):
        try:
            sample = dataset[i]
        except CutmixLpError:
            raise
        except OSError as exc:
            raise ManifestError(f"sample {rec.id!r}: {exc}")
        if sample.ref_map is not None:
            report = validate_pair(sample.ref_map, sample.label)
            if not report.ok:
                dataset.warnings.append((rec.id, report))
    return dataset


def write_dataset(
    out_dir,
    samples,
    class_names,
    geometry: Geometry,
) -> Path:
    """Write samples (with any maps/masks) plus a manifest under ``out_dir``.

    ``samples`` yields (id, ImageRaster, MultiLabel, RefMap | None,
    MaskStack | None) tuples. Returns the manifest path.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = []
    label_rows = []
    for sample_id, image, label, ref_map, masks in samples:
        rec = {"id": sample_id, "image": f"images/{sample_id}.rten",
               "labels": list(label.classes)}
        write_rten(out / rec["image"], image.data)
        if ref_map is not None:
            if ref_map.num_classes > 255:
                raise ManifestError("RTEN maps support at most 255 classes")
            (out / "maps").mkdir(exist_ok=True)
            rec["map"] = f"maps/{sample_id}.rten"
            write_rten(out / rec["map"], ref_map.data.astype(np.uint8))
        if masks is not None:
            (out / "masks").mkdir(exist_ok=True)
            rec["masks"] = f"masks/{sample_id}.rten"
            write_rten(out / rec["masks"], masks.data.astype(np.uint8))
        records.append(rec)
        label_rows.append((sample_id, label.classes))

    write_labels(out / "labels.txt", label_rows)
    manifest = {
        "classes": list(class_names),
        "geometry": {
            "channels": geometry.channels,
            "height": geometry.height,
            "width": geometry.width,
            "dtype": geometry.dtype,
        },
        "samples": records,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_path
