import json

import numpy as np
import pytest

from cutmix_lp.formats import write_rten


def build_dataset_dir(
    root,
    n=6,
    num_classes=4,
    channels=2,
    height=12,
    width=12,
    with_maps=True,
    with_heatmaps=False,
    seed=0,
    map_arrays=None,
):
    """Write a synthetic dataset (RTEN files + manifest) and return the manifest path.

    ``map_arrays`` overrides the generated maps; labels always match the
    classes present in each map.
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(exist_ok=True)
    if with_maps:
        (root / "maps").mkdir(exist_ok=True)
    if with_heatmaps:
        (root / "heat").mkdir(exist_ok=True)
    samples = []
    for i in range(n):
        sample_id = f"s{i:03d}"
        image = rng.integers(0, 256, (channels, height, width)).astype(np.uint8)
        write_rten(root / "images" / f"{sample_id}.rten", image)
        entry = {"id": sample_id, "image": f"images/{sample_id}.rten"}
        if with_maps:
            if map_arrays is not None:
                data = np.asarray(map_arrays[i], dtype=np.uint8)
            else:
                data = rng.integers(1, num_classes + 1, (height, width)).astype(np.uint8)
            write_rten(root / "maps" / f"{sample_id}.rten", data)
            entry["map"] = f"maps/{sample_id}.rten"
            classes = sorted(int(v) for v in np.unique(data) if v != 0)
        else:
            classes = sorted(
                set(int(c) for c in rng.integers(1, num_classes + 1, 2))
            )
        if with_heatmaps:
            heat = rng.random((num_classes, height, width)).astype(np.float32)
            write_rten(root / "heat" / f"{sample_id}.rten", heat)
            entry["heatmaps"] = f"heat/{sample_id}.rten"
        entry["labels"] = classes
        samples.append(entry)
    manifest = {
        "classes": [f"class_{i}" for i in range(1, num_classes + 1)],
        "geometry": {"channels": channels, "height": height, "width": width,
                     "dtype": "u8"},
        "samples": samples,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def dataset_dir(tmp_path):
    def factory(**kwargs):
        return build_dataset_dir(tmp_path / "data", **kwargs)

    return factory
