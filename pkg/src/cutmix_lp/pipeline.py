"""Deterministic batch pipeline.

Samples are grouped into consecutive batches. Each sample is replaced
by an augmented pairing with probability ``p``; the partner is drawn
uniformly from the other samples of the same batch (never itself), so
the batch size never changes.

All randomness is keyed by (seed, epoch, batch, position, purpose) with
separate purpose streams for the replace coin, the partner choice, and
the box draws. Consequences:

  * two runs with equal inputs are byte-identical, with any worker count;
  * changing ``p`` changes which positions are replaced but never the
    boxes or partners drawn at positions that stay replaced.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

from . import rng as rng_mod
from .boxes import BoxSizeRange
from .errors import ConfigError
from .mixing import AugmentedSample, LpConfig, Sample, augment

PARTNER_MODES = ("batch", "dataset")

PipelineItem = Union[Sample, AugmentedSample]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that determines a pipeline run besides the dataset."""

    policy: str = "lp_map"
    box_range: BoxSizeRange = BoxSizeRange(0.3, 0.7)
    p: float = 0.5
    t_cam: float = 0.1
    t_map: int = 10
    seed: int = 42
    batch_size: int = 300
    partner_mode: str = "batch"
    map_smoothing: bool = False

    def __post_init__(self):
        if self.partner_mode not in PARTNER_MODES:
            raise ConfigError(
                f"partner_mode must be one of {PARTNER_MODES}, got {self.partner_mode!r}"
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.p > 0.0 and self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 when augmentation is enabled")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        # Policy/p/t_map ranges are validated by LpConfig.
        self.lp_config()

    def lp_config(self) -> LpConfig:
        return LpConfig(
            policy=self.policy,
            t_map=self.t_map,
            p=self.p,
            map_smoothing=self.map_smoothing,
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {
            "policy", "box_range", "p", "t_cam", "t_map", "seed",
            "batch_size", "partner_mode", "map_smoothing",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(raw)
        if "box_range" in kwargs:
            lo, hi = kwargs["box_range"]
            kwargs["box_range"] = BoxSizeRange(float(lo), float(hi))
        return cls(**kwargs)

    def override(self, **kwargs) -> "PipelineConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)


def _produce_batch(
    batch: Sequence[Sample],
    indices: Sequence[int],
    batch_index: int,
    epoch: int,
    config: PipelineConfig,
    all_samples: Optional[Sequence[Sample]],
) -> list[PipelineItem]:
    lp = config.lp_config()
    within_batch = config.partner_mode == "batch"
    pool = batch if within_batch else all_samples
    out: list[PipelineItem] = []
    for position, sample in enumerate(batch):
        replaced = False
        if config.p > 0.0:
            coin = rng_mod.stream(
                config.seed, epoch, batch_index, position, rng_mod.REPLACE
            )
            replaced = float(coin.random()) < config.p
        if not replaced:
            out.append(sample)
            continue
        partner_rng = rng_mod.stream(
            config.seed, epoch, batch_index, position, rng_mod.PARTNER
        )
        self_index = position if within_batch else indices[position]
        j = int(partner_rng.integers(0, len(pool) - 1))
        if j >= self_index:
            j += 1
        box_rng = rng_mod.stream(config.seed, epoch, batch_index, position, rng_mod.BOXES)
        out.append(augment(sample, pool[j], lp, config.box_range, box_rng))
    return out


def run_pipeline(
    samples: Sequence[Sample],
    config: PipelineConfig,
    epoch: int = 0,
    workers: int = 1,
) -> Iterator[list[PipelineItem]]:
    """Batches with per-sample probabilistic augmentation, in order.

    ``samples`` is any indexable collection (a loaded Dataset works).
    Emission order and content are independent of ``workers``.
    Configuration problems raise immediately, not on first consumption.
    """
    n = len(samples)
    if n == 0:
        raise ConfigError("pipeline needs at least one sample")
    batches = [
        (b, list(range(start, min(start + config.batch_size, n))))
        for b, start in enumerate(range(0, n, config.batch_size))
    ]
    if config.p > 0.0 and config.partner_mode == "batch":
        for _, idxs in batches:
            if len(idxs) < 2:
                raise ConfigError(
                    "a batch of size 1 has no partner; disable augmentation or "
                    "choose a batch size that divides the dataset more evenly"
                )
    if config.p > 0.0 and config.partner_mode == "dataset" and n < 2:
        raise ConfigError("dataset-wide partner selection needs at least two samples")
    return _generate(samples, config, epoch, workers, batches)


def _generate(samples, config, epoch, workers, batches):
    all_samples = None
    if config.partner_mode == "dataset":
        all_samples = [samples[i] for i in range(len(samples))]

    def produce(entry):
        b, idxs = entry
        batch = [samples[i] for i in idxs]
        return _produce_batch(batch, idxs, b, epoch, config, all_samples)

    if workers <= 1:
        for entry in batches:
            yield produce(entry)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(produce, batches)
