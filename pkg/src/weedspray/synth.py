"""Synthetic fields, detector noise, and a pixel-raster spray oracle.

Random draws use numpy's PCG64 bit generator seeded explicitly, so the same
parameters always give the same dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from weedspray.geometry import CROP, WEED, BoundingBox, Dataset, ImageRecord
from weedspray.spray import NozzleConfig

CONFIDENCE_MODELS = ("constant", "uniform")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class FieldParams:
    image_count: int = 10
    width: int = 640
    height: int = 360
    weeds_per_image: float = 5.0
    crops_per_image: float = 3.0
    box_size_range: tuple[int, int] = (10, 60)
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.box_size_range
        if self.image_count < 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("image count must be non-negative and sizes positive")
        if self.weeds_per_image < 0 or self.crops_per_image < 0:
            raise ValueError("mean counts must be non-negative")
        if not 1 <= lo <= hi:
            raise ValueError(f"bad box size range {self.box_size_range}")
        if hi > min(self.width, self.height):
            raise ValueError(f"box size {hi} does not fit a {self.width}x{self.height} image")


@dataclass(frozen=True)
class NoiseParams:
    miss_rate: float = 0.0
    false_positive_rate: float = 0.0
    jitter: int = 0
    confidence_model: str = "constant"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must be a probability")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be non-negative")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        if self.confidence_model not in CONFIDENCE_MODELS:
            raise ValueError(f"unknown confidence model {self.confidence_model!r}")


def _random_box(rng: np.random.Generator, width: int, height: int, lo: int, hi: int, class_id: int) -> BoundingBox:
    w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
    x = int(rng.integers(0, width - w + 1))
    y = int(rng.integers(0, height - h + 1))
    return BoundingBox(float(x), float(y), float(x + w), float(y + h), class_id)


def generate_field(p: FieldParams) -> Dataset:
    """Images with Poisson-distributed crop and weed counts and integer-corner boxes."""
    rng = _rng(p.seed)
    lo, hi = p.box_size_range
    images = []
    digits = len(str(max(p.image_count - 1, 0)))
    for i in range(p.image_count):
        n_crop = int(rng.poisson(p.crops_per_image))
        n_weed = int(rng.poisson(p.weeds_per_image))
        boxes = [_random_box(rng, p.width, p.height, lo, hi, CROP) for _ in range(n_crop)]
        boxes += [_random_box(rng, p.width, p.height, lo, hi, WEED) for _ in range(n_weed)]
        images.append(ImageRecord(f"img{i:0{digits}d}", p.width, p.height, tuple(boxes)))
    return Dataset(name=f"synth-{p.seed}", images=tuple(images))


def _confidence(rng: np.random.Generator, model: str) -> float:
    return 1.0 if model == "constant" else float(rng.uniform(0.0, 1.0))


def perturb_detections(d: Dataset, noise: NoiseParams) -> Dataset:
    """Simulate an imperfect detector from the ground truth of ``d``.

    Each ground-truth box is dropped with probability ``miss_rate``; kept
    boxes get integer corner jitter in ``[-jitter, jitter]``, are clipped,
    and discarded if the jitter collapsed them. A Poisson number of
    spurious boxes is added per image.
    """
    rng = _rng(noise.seed)
    j = noise.jitter
    images = []
    for im in d.images:
        dets = []
        for g in im.ground_truth:
            if rng.random() < noise.miss_rate:
                continue
            conf = _confidence(rng, noise.confidence_model)
            dx0, dy0, dx1, dy1 = (int(v) for v in rng.integers(-j, j + 1, size=4)) if j else (0, 0, 0, 0)
            x0 = min(max(g.x_min + dx0, 0.0), im.width)
            y0 = min(max(g.y_min + dy0, 0.0), im.height)
            x1 = min(max(g.x_max + dx1, 0.0), im.width)
            y1 = min(max(g.y_max + dy1, 0.0), im.height)
            if x1 > x0 and y1 > y0:
                dets.append(BoundingBox(x0, y0, x1, y1, g.class_id, conf))
        lo = max(1, min(im.width, im.height) // 40)
        hi = max(lo, min(im.width, im.height) // 6)
        for _ in range(int(rng.poisson(noise.false_positive_rate))):
            cls = int(rng.integers(0, 2))
            box = _random_box(rng, im.width, im.height, lo, hi, cls)
            dets.append(replace(box, confidence=_confidence(rng, noise.confidence_model)))
        images.append(replace(im, detections=tuple(dets)))
    return replace(d, images=tuple(images))


def with_perfect_detections(d: Dataset, confidence: float = 1.0) -> Dataset:
    """Copy every ground-truth box into the detections."""
    return replace(
        d,
        images=tuple(
            replace(im, detections=tuple(replace(g, confidence=confidence) for g in im.ground_truth))
            for im in d.images
        ),
    )


def _as_int(value: float, what: str) -> int:
    if value != int(value):
        raise ValueError(f"raster oracle needs integer geometry; {what} = {value}")
    return int(value)


def raster_oracle(image: ImageRecord, cfg: NozzleConfig) -> tuple[int, list[bool]]:
    """Paint spray rectangles on a pixel mask and read coverage off it.

    Pixel ``(x, y)`` stands for the unit square ``[x, x+1) x [y, y+1)``. A
    stripe fires when any of its pixel rows also belongs to a weed
    detection. Returns the painted pixel count and, for every ground-truth
    weed in order, whether all of its pixels are painted.
    """
    h, w, n = image.height, image.width, cfg.nozzle_count
    if h % n:
        raise ValueError(f"raster oracle needs height {h} divisible by {n} nozzles")
    margin = _as_int(cfg.margin, "margin")
    rows_per_stripe = h // n
    mask = np.zeros((h, w), dtype=bool)
    for det in image.detections:
        if det.class_id != cfg.weed_class:
            continue
        x0, y0, x1, y1 = (_as_int(v, "detection corner") for v in det.corners)
        det_rows = set(range(y0, y1))
        for k in range(n):
            stripe_rows = range(k * rows_per_stripe, (k + 1) * rows_per_stripe)
            if det_rows.intersection(stripe_rows):
                mask[stripe_rows.start : stripe_rows.stop, max(0, x0 - margin) : min(w, x1 + margin)] = True
    flags = []
    for g in image.ground_truth:
        if g.class_id != cfg.weed_class:
            continue
        x0, y0, x1, y1 = (_as_int(v, "ground-truth corner") for v in g.corners)
        flags.append(bool(mask[y0:y1, x0:x1].all()))
    return int(mask.sum()), flags
