"""Stripe-based spray model: spray plans, weed coverage rate and area sprayed.

An image is divided along its height (the boom direction) into one equal
stripe per nozzle. A weed detection triggers every stripe it overlaps; the
triggered stripe is sprayed over the detection's x-extent (the travel
direction) widened by a margin on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from weedspray.geometry import WEED, BoundingBox, ImageRecord, Interval, merge_intervals, union_length

# absorbs round-off from rescaled (fractional) corners in containment checks
CONTAINMENT_EPS = 1e-9


@dataclass(frozen=True)
class NozzleConfig:
    nozzle_count: int = 1
    margin: float = 0.0
    weed_class: int = WEED

    def __post_init__(self) -> None:
        if self.nozzle_count < 1:
            raise ValueError("nozzle_count must be at least 1")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")


@dataclass(frozen=True)
class Stripe:
    index: int
    y_lo: float
    y_hi: float

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    def overlaps(self, box: BoundingBox) -> bool:
        # open intervals: touching a boundary does not trigger the stripe
        return box.y_min < self.y_hi and box.y_max > self.y_lo


@dataclass(frozen=True)
class SprayPlan:
    image_id: str
    stripes: tuple[Stripe, ...]
    intervals: tuple[tuple[Interval, ...], ...]
    sprayed_area: float


@dataclass(frozen=True)
class SprayReport:
    nozzle_count: int
    weed_coverage_rate: float
    area_sprayed: float
    herbicide_saving: float
    weeds_total: int
    weeds_sprayed: int


def make_stripes(height: float, n: int) -> list[Stripe]:
    if n < 1:
        raise ValueError("need at least one stripe")
    if height <= 0:
        raise ValueError("height must be positive")
    # k * H / n per boundary, not accumulated, so boundaries are exact where possible
    bounds = [k * height / n for k in range(n)] + [float(height)]
    return [Stripe(k, bounds[k], bounds[k + 1]) for k in range(n)]


def build_spray_plan(image: ImageRecord, cfg: NozzleConfig) -> SprayPlan:
    stripes = make_stripes(image.height, cfg.nozzle_count)
    per_stripe: list[list[Interval]] = [[] for _ in stripes]
    for det in image.detections:
        if det.class_id != cfg.weed_class:
            continue
        span = Interval(max(0.0, det.x_min - cfg.margin), min(float(image.width), det.x_max + cfg.margin))
        for stripe in stripes:
            if stripe.overlaps(det):
                per_stripe[stripe.index].append(span)
    intervals = tuple(tuple(merge_intervals(ivs)) for ivs in per_stripe)
    area = math.fsum(s.height * union_length(ivs) for s, ivs in zip(stripes, intervals))
    return SprayPlan(image.image_id, tuple(stripes), intervals, area)


def _covered(lo: float, hi: float, merged: Sequence[Interval]) -> bool:
    return any(iv.lo - CONTAINMENT_EPS <= lo and hi <= iv.hi + CONTAINMENT_EPS for iv in merged)


def is_sprayed(gt_weed: BoundingBox, plan: SprayPlan) -> bool:
    """Whether the weed box lies wholly inside the sprayed region.

    Checked stripe by stripe: in every stripe the box overlaps, its x-extent
    must sit inside one merged spray interval.
    """
    hit_any = False
    for stripe, merged in zip(plan.stripes, plan.intervals):
        if not stripe.overlaps(gt_weed):
            continue
        hit_any = True
        if not _covered(gt_weed.x_min, gt_weed.x_max, merged):
            return False
    return hit_any


def _paired(images: Sequence[ImageRecord], plans: Sequence[SprayPlan]):
    if len(images) != len(plans):
        raise ValueError(f"{len(images)} images but {len(plans)} plans")
    for im, plan in zip(images, plans):
        if im.image_id != plan.image_id:
            raise ValueError(f"plan for {plan.image_id!r} paired with image {im.image_id!r}")
    return sorted(zip(images, plans), key=lambda pair: pair[0].image_id)


def count_sprayed(
    images: Sequence[ImageRecord], plans: Sequence[SprayPlan], weed_class: int = WEED
) -> tuple[int, int]:
    """(ground-truth weeds wholly sprayed, ground-truth weeds in total)."""
    sprayed = total = 0
    for im, plan in _paired(images, plans):
        for g in im.ground_truth:
            if g.class_id == weed_class:
                total += 1
                sprayed += is_sprayed(g, plan)
    return sprayed, total


def weed_coverage_rate(
    images: Sequence[ImageRecord], plans: Sequence[SprayPlan], weed_class: int = WEED
) -> float:
    """Percentage of ground-truth weeds, pooled over all images, that are wholly sprayed."""
    sprayed, total = count_sprayed(images, plans, weed_class)
    if total == 0:
        raise ValueError("no ground-truth weeds; weed coverage rate undefined")
    return 100.0 * sprayed / total


def area_sprayed(plans: Sequence[SprayPlan], images: Sequence[ImageRecord]) -> float:
    """Sprayed area as a percentage of the total imaged area."""
    pairs = _paired(images, plans)
    if not pairs:
        return 0.0
    sprayed = math.fsum(plan.sprayed_area for _, plan in pairs)
    total = math.fsum(im.area for im, _ in pairs)
    return 100.0 * sprayed / total


def spray_report(images: Sequence[ImageRecord], cfg: NozzleConfig) -> SprayReport:
    plans = [build_spray_plan(im, cfg) for im in images]
    sprayed, total = count_sprayed(images, plans, cfg.weed_class)
    if total == 0:
        raise ValueError("no ground-truth weeds; weed coverage rate undefined")
    area = area_sprayed(plans, images)
    return SprayReport(
        nozzle_count=cfg.nozzle_count,
        weed_coverage_rate=100.0 * sprayed / total,
        area_sprayed=area,
        herbicide_saving=100.0 - area,
        weeds_total=total,
        weeds_sprayed=sprayed,
    )


def spray_sweep(
    images: Sequence[ImageRecord],
    nozzle_counts: Sequence[int] = (1, 2, 3, 4),
    margin: float = 0.0,
    weed_class: int = WEED,
) -> list[SprayReport]:
    """One report per nozzle count, ascending, sharing the same detections."""
    if not nozzle_counts:
        raise ValueError("nozzle_counts must not be empty")
    return [
        spray_report(images, NozzleConfig(n, margin, weed_class)) for n in sorted(set(nozzle_counts))
    ]
