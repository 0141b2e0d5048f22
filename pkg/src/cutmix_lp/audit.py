"""Label-noise audit: what naive CutMix labeling gets wrong.

For a dataset with reference maps, simulate pairings and compare the
propagated label (ground truth for the augmented image) against two
hard naive interpretations:

  * ``keep_y1`` - keep the base image's label unchanged;
  * ``union``   - union of both source labels.

Per trial, a class in the propagated label that the naive label misses
is subtractive noise; a class the naive label claims without surviving
pixels is additive noise. The union policy cannot produce subtractive
noise when maps and labels are consistent; keep_y1 typically produces
both kinds, more often the larger the boxes get.
"""

from dataclasses import dataclass
from typing import Sequence

from . import rng as rng_mod
from .boxes import BoxSizeRange, gen_boxes, sample_partner_box
from .errors import ConfigError
from .mixing import Sample, compose_map, readout_phi


@dataclass(frozen=True)
class PolicyNoise:
    """Noise rates of one naive labeling policy over the audit trials."""

    subtractive_rate: float
    additive_rate: float
    mean_subtractive_classes: float
    mean_additive_classes: float


@dataclass(frozen=True)
class AuditReport:
    n_trials: int
    box_range: tuple[float, float]
    keep_y1: PolicyNoise
    union: PolicyNoise
    records: tuple[dict, ...]

    def as_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "box_range": list(self.box_range),
            "keep_y1": vars(self.keep_y1).copy(),
            "union": vars(self.union).copy(),
        }


def run_audit(
    samples: Sequence[Sample],
    box_range: BoxSizeRange,
    n_trials: int = 10_000,
    seed: int = 42,
    keep_records: bool = False,
) -> AuditReport:
    """Monte Carlo audit of naive-label noise against propagated labels."""
    n = len(samples)
    if n < 2:
        raise ConfigError("audit needs at least two samples")
    if n_trials < 1:
        raise ConfigError("n_trials must be positive")
    missing = [s.id for s in samples if s.ref_map is None]
    if missing:
        raise ConfigError(
            f"audit needs reference maps as ground truth; samples without maps: "
            f"{missing[:5]}. Provide maps, or build synthetic fixtures; for "
            f"mask-based datasets run the lp_xai pipeline instead."
        )

    height = samples[0].image.height
    width = samples[0].image.width
    totals = {
        "keep_y1": [0, 0, 0, 0],  # sub events, add events, sub classes, add classes
        "union": [0, 0, 0, 0],
    }
    records = []
    for trial in range(n_trials):
        rng = rng_mod.stream(seed, rng_mod.AUDIT, trial)
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        base, partner = samples[i], samples[j]
        box1 = gen_boxes(box_range, 1, height, width, rng)[0]
        box2 = sample_partner_box(box1, height, width, rng)
        composed = compose_map(base.ref_map, partner.ref_map, box1, box2)
        lp = set(readout_phi(composed).classes)
        y1 = set(base.label.classes)
        union = y1 | set(partner.label.classes)
        for name, naive in (("keep_y1", y1), ("union", union)):
            sub = lp - naive
            add = naive - lp
            acc = totals[name]
            acc[0] += bool(sub)
            acc[1] += bool(add)
            acc[2] += len(sub)
            acc[3] += len(add)
        if keep_records:
            records.append(
                {
                    "trial": trial,
                    "base": base.id,
                    "partner": partner.id,
                    "box1": list(box1.as_tuple()),
                    "box2": list(box2.as_tuple()),
                    "lp_classes": sorted(lp),
                    "keep_y1_subtractive": sorted(lp - y1),
                    "keep_y1_additive": sorted(y1 - lp),
                    "union_subtractive": sorted(lp - union),
                    "union_additive": sorted(union - lp),
                }
            )

    def summarize(acc) -> PolicyNoise:
        return PolicyNoise(
            subtractive_rate=acc[0] / n_trials,
            additive_rate=acc[1] / n_trials,
            mean_subtractive_classes=acc[2] / n_trials,
            mean_additive_classes=acc[3] / n_trials,
        )

    return AuditReport(
        n_trials=n_trials,
        box_range=(box_range.a_min, box_range.a_max),
        keep_y1=summarize(totals["keep_y1"]),
        union=summarize(totals["union"]),
        records=tuple(records),
    )
