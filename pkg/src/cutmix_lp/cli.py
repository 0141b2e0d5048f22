"""Command-line interface.

Subcommands: augment, simulate-noise, audit, gen-boxes, validate,
threshold. Flags mirror the pipeline/noise configuration fields; report
commands write line-delimited records, a summary table, and a figure
into the output directory. ``CUTMIX_LP_WORKERS`` sets the default
worker count for batch production.
"""

import json
import os
from pathlib import Path

import click
import numpy as np

from . import rng as rng_mod
from .boxes import BoxSizeRange, gen_boxes
from .cam import threshold_heatmaps
from .core import Heatmap, MultiLabel, SoftLabel
from .dataset import load_dataset, write_dataset
from .errors import CutmixLpError
from .formats import read_rten, write_labels, write_rten
from .mixing import AugmentedSample
from .pipeline import PipelineConfig, run_pipeline
from . import report as report_mod

# .noise (scipy-backed) and .audit import inside their commands to keep
# startup fast for the other subcommands.


class RangeParam(click.ParamType):
    """Box size range given as 'A_MIN:A_MAX', e.g. 0.3:0.7."""

    name = "range"

    def convert(self, value, param, ctx):
        if isinstance(value, BoxSizeRange):
            return value
        try:
            lo, _, hi = str(value).partition(":")
            return BoxSizeRange(float(lo), float(hi))
        except (ValueError, CutmixLpError) as exc:
            self.fail(f"invalid box range {value!r}: {exc}", param, ctx)


RANGE = RangeParam()


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CUTMIX_LP_WORKERS", "1")))
    except ValueError:
        return 1


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


@click.group()
def main():
    """Deterministic CutMix with label propagation for multi-label rasters."""


def _build_config(config_path, **overrides) -> PipelineConfig:
    base = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    return base.override(**overrides)


@main.command("gen-boxes")
@click.option("--range", "box_range", type=RANGE, default="0.3:0.7", show_default=True)
@click.option("--count", "-n", type=int, default=5, show_default=True)
@click.option("--height", type=int, default=120, show_default=True)
@click.option("--width", type=int, default=120, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--histogram", is_flag=True,
              help="Aggregate draws into 'r_a r_b r_c r_d count' lines.")
def cmd_gen_boxes(box_range, count, height, width, seed, histogram):
    """Print COUNT random boxes, one 'r_a r_b r_c r_d' line each."""
    try:
        boxes = gen_boxes(box_range, count, height, width, rng_mod.stream(seed, rng_mod.BOXES))
    except CutmixLpError as exc:
        raise _fail(exc)
    if histogram:
        counts = {}
        for box in boxes:
            counts[box.as_tuple()] = counts.get(box.as_tuple(), 0) + 1
        for key in sorted(counts):
            click.echo(" ".join(str(v) for v in key) + f" {counts[key]}")
    else:
        for box in boxes:
            click.echo(" ".join(str(v) for v in box.as_tuple()))


@main.command("validate")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--t-cam", type=float, default=0.1, show_default=True)
@click.option("--strict", is_flag=True, help="Exit nonzero when warnings are found.")
def cmd_validate(manifest, t_cam, strict):
    """Load MANIFEST, check every sample, report map/label inconsistencies."""
    try:
        dataset = load_dataset(manifest, t_cam=t_cam)
    except CutmixLpError as exc:
        raise _fail(exc)
    for sample_id, pair_report in dataset.warnings:
        for message in pair_report.messages():
            click.echo(f"warning: {sample_id}: {message}")
    click.echo(
        f"{len(dataset)} samples, {dataset.num_classes} classes, "
        f"{len(dataset.warnings)} samples with warnings"
    )
    if strict and dataset.warnings:
        raise SystemExit(1)


@main.command("augment")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", type=click.Choice(["naive", "lp_map", "lp_xai"]))
@click.option("--range", "box_range", type=RANGE)
@click.option("--p", type=float)
@click.option("--t-cam", type=float)
@click.option("--t-map", type=int)
@click.option("--seed", type=int)
@click.option("--batch-size", type=int)
@click.option("--partner-mode", type=click.Choice(["batch", "dataset"]))
@click.option("--epoch", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None)
def cmd_augment(manifest, out, config_path, box_range, epoch, workers, **overrides):
    """Augment a dataset once and write the result under --out."""
    try:
        config = _build_config(config_path, box_range=box_range, **overrides)
        dataset = load_dataset(manifest, t_cam=config.t_cam)
        workers = workers if workers is not None else _default_workers()

        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        provenance_rows = []
        soft_labels = {}
        augmented = 0

        def emit():
            nonlocal augmented
            for batch in run_pipeline(dataset, config, epoch=epoch, workers=workers):
                for item in batch:
                    if isinstance(item, AugmentedSample):
                        augmented += 1
                        sample_id = item.provenance.source_ids[0]
                        provenance_rows.append(
                            {
                                "id": sample_id,
                                "augmented": True,
                                "sources": list(item.provenance.source_ids),
                                "box1": list(item.provenance.box1.as_tuple()),
                                "box2": list(item.provenance.box2.as_tuple()),
                                "flags": list(item.provenance.flags),
                            }
                        )
                        if isinstance(item.label, SoftLabel):
                            soft_labels[sample_id] = [float(w) for w in item.label.weights]
                            hard = MultiLabel((item.label.weights > 0).astype(np.uint8))
                        else:
                            hard = item.label
                        yield sample_id, item.image, hard, item.ref_map, item.masks
                    else:
                        provenance_rows.append({"id": item.id, "augmented": False})
                        yield item.id, item.image, item.label, item.ref_map, item.masks

        write_dataset(
            out_dir,
            emit(),
            dataset.manifest.class_names,
            dataset.manifest.geometry,
        )
        if soft_labels:
            from .formats import write_soft_labels

            write_soft_labels(out_dir / "soft_labels.txt", sorted(soft_labels.items()))
        report_mod.write_records(out_dir / "provenance.jsonl", provenance_rows)
    except CutmixLpError as exc:
        raise _fail(exc)
    click.echo(f"augmented {augmented} of {len(dataset)} samples -> {out_dir}")


@main.command("simulate-noise")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--kind", required=True,
              type=click.Choice(["mask_shift", "dilation_erosion", "rectify_borders",
                                 "border_deformation", "segment_swap", "class_swap"]))
@click.option("--fraction", default="1.0", show_default=True,
              help="Comma-separated fractions of maps to corrupt.")
@click.option("--magnitude", default=None,
              help="Comma-separated kind-specific magnitudes.")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "records"]), default="table",
              show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_simulate_noise(manifest, out, kind, fraction, magnitude, seed, fmt, figures):
    """Corrupt reference maps and report the positional damage (IoU)."""
    from .noise import NoiseSpec, apply_noise_suite, map_iou

    try:
        dataset = load_dataset(manifest)
        fractions = [float(tok) for tok in fraction.split(",") if tok.strip()]
        magnitudes = (
            [int(tok) for tok in magnitude.split(",") if tok.strip()]
            if magnitude is not None
            else [None]
        )
        entries = []
        for sample in dataset:
            if sample.ref_map is None:
                raise CutmixLpError(
                    f"sample {sample.id!r} has no reference map; noise simulation "
                    f"needs maps"
                )
            entries.append((sample.id, sample.ref_map, sample.label))

        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        summary_rows = []
        per_map_rows = []
        for frac in fractions:
            for mag in magnitudes:
                spec = NoiseSpec(kind=kind, fraction=frac, magnitude=mag)
                result = apply_noise_suite(entries, spec, seed)
                combo = f"{kind}_f{frac:g}" + (f"_m{mag}" if mag is not None else "")
                combo_dir = out_dir / combo
                combo_dir.mkdir(exist_ok=True)
                _write_noised(combo_dir, dataset, result)
                report_mod.write_records(combo_dir / "noise_manifest.jsonl", result.records)
                ious = []
                for (sample_id, clean, _), noisy in zip(entries, result.maps):
                    iou = map_iou(clean, noisy)
                    ious.append(iou.mean)
                    per_map_rows.append(
                        {"kind": kind, "fraction": frac, "magnitude": mag,
                         "id": sample_id, "mean_iou": iou.mean}
                    )
                summary_rows.append(
                    {"kind": kind, "fraction": frac, "magnitude": mag,
                     "mean_iou": float(np.mean(ious)), "corrupted": len(
                         {r["id"] for r in result.records})}
                )
        report_mod.write_records(out_dir / "iou_records.jsonl", per_map_rows)
        report_mod.write_records(out_dir / "iou_summary.jsonl", summary_rows)
        table = report_mod.iou_table(summary_rows)
        (out_dir / "iou_summary.txt").write_text(table + "\n", encoding="utf-8")
        if figures:
            report_mod.iou_figure(summary_rows, out_dir / "iou.png")
    except CutmixLpError as exc:
        raise _fail(exc)
    if fmt == "records":
        for row in summary_rows:
            click.echo(json.dumps(row, sort_keys=True))
    else:
        click.echo(table)


def _write_noised(combo_dir: Path, dataset, result) -> None:
    """Corrupted maps + labels + manifest referencing the original images."""
    if dataset.num_classes > 255:
        raise CutmixLpError("RTEN maps support at most 255 classes")
    (combo_dir / "maps").mkdir(exist_ok=True)
    records = []
    label_rows = []
    for rec, noisy_map, label in zip(dataset.manifest.records, result.maps, result.labels):
        image_rel = os.path.relpath(dataset.manifest.root / rec.image, combo_dir)
        map_rel = f"maps/{rec.id}.rten"
        write_rten(combo_dir / map_rel, noisy_map.data.astype(np.uint8))
        records.append(
            {"id": rec.id, "image": image_rel, "labels": list(label.classes),
             "map": map_rel}
        )
        label_rows.append((rec.id, label.classes))
    write_labels(combo_dir / "labels.txt", label_rows)
    geometry = dataset.manifest.geometry
    manifest = {
        "classes": list(dataset.manifest.class_names),
        "geometry": {"channels": geometry.channels, "height": geometry.height,
                     "width": geometry.width, "dtype": geometry.dtype},
        "samples": records,
    }
    (combo_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@main.command("audit")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--range", "box_range", type=RANGE, default="0.3:0.7", show_default=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--records/--no-records", "keep_records", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "records"]), default="table",
              show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_audit(manifest, out, box_range, trials, seed, keep_records, fmt, figures):
    """Quantify naive-CutMix label noise against propagated labels."""
    from .audit import run_audit

    try:
        dataset = load_dataset(manifest)
        samples = list(dataset)
        audit_report = run_audit(
            samples, box_range, n_trials=trials, seed=seed, keep_records=keep_records
        )
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "audit_report.json").write_text(
            json.dumps(audit_report.as_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        if keep_records:
            report_mod.write_records(out_dir / "audit_records.jsonl", audit_report.records)
        if figures:
            report_mod.audit_figure(audit_report, out_dir / "audit_rates.png")
    except CutmixLpError as exc:
        raise _fail(exc)
    if fmt == "records":
        click.echo(json.dumps(audit_report.as_dict(), sort_keys=True))
    else:
        click.echo(report_mod.audit_table(audit_report))


@main.command("threshold")
@click.argument("heatmaps", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--classes", required=True,
              help="Comma-separated 1-based ids of classes present in the image.")
@click.option("--t-cam", type=float, default=0.1, show_default=True)
def cmd_threshold(heatmaps, out, classes, t_cam):
    """Binarize a heatmap stack (RTEN f32 L x H x W) into activation masks."""
    try:
        raw = read_rten(heatmaps)
        heat = Heatmap(raw)
        present = [int(tok) for tok in classes.split(",") if tok.strip()]
        label = MultiLabel.from_classes(present, heat.num_classes)
        masks = threshold_heatmaps(heat, label, t_cam)
        write_rten(out, masks.data.astype(np.uint8))
    except CutmixLpError as exc:
        raise _fail(exc)
    click.echo(f"wrote {masks.num_classes} mask planes -> {out}")


if __name__ == "__main__":
    main()
