"""Shared geometric and dataset types.

Boxes are stored in pixel corner form ``(x_min, y_min, x_max, y_max)`` with
real-valued coordinates. Every type here is an immutable value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

CROP = 0
WEED = 1

DEFAULT_CLASS_NAMES = {CROP: "sugar beet", WEED: "weed"}


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates.

    ``confidence`` is ``None`` for ground truth and a score in [0, 1] for
    detections.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int
    confidence: float | None = None

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self.corners}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


def clip_box(
    x_min: float,
    y_min: float,
    x_max: float,
    y_max: float,
    width: float,
    height: float,
) -> tuple[float, float, float, float]:
    """Clamp raw corners to ``[0, width] x [0, height]``."""
    return (
        min(max(x_min, 0.0), width),
        min(max(y_min, 0.0), height),
        min(max(x_max, 0.0), width),
        min(max(y_max, 0.0), height),
    )


@dataclass(frozen=True)
class ImageRecord:
    """One frame: its size, annotated boxes and detector output."""

    image_id: str
    width: int
    height: int
    ground_truth: tuple[BoundingBox, ...] = ()
    detections: tuple[BoundingBox, ...] = ()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.image_id!r}: non-positive size")
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        object.__setattr__(self, "detections", tuple(self.detections))
        for kind, boxes in (("ground truth", self.ground_truth), ("detection", self.detections)):
            for box in boxes:
                if (
                    box.x_min < 0
                    or box.y_min < 0
                    or box.x_max > self.width
                    or box.y_max > self.height
                ):
                    raise ValueError(
                        f"image {self.image_id!r}: {kind} box {box.corners} outside "
                        f"{self.width}x{self.height}"
                    )
        for box in self.ground_truth:
            if box.confidence is not None:
                raise ValueError(f"image {self.image_id!r}: ground truth box carries a confidence")
        for box in self.detections:
            if box.confidence is None:
                raise ValueError(f"image {self.image_id!r}: detection box lacks a confidence")

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Dataset:
    name: str
    images: tuple[ImageRecord, ...] = ()
    class_names: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_CLASS_NAMES))

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        seen: set[str] = set()
        for image in self.images:
            if image.image_id in seen:
                raise ValueError(f"duplicate image_id {image.image_id!r}")
            seen.add(image.image_id)

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True, order=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"interval lo {self.lo} > hi {self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when they do not overlap."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Sort and merge intervals; touching intervals become one."""
    merged: list[Interval] = []
    for iv in sorted(intervals):
        if merged and iv.lo <= merged[-1].hi:
            if iv.hi > merged[-1].hi:
                merged[-1] = Interval(merged[-1].lo, iv.hi)
        else:
            merged.append(iv)
    return merged


def union_length(intervals: Iterable[Interval]) -> float:
    """Total length covered by the union of ``intervals``."""
    return sum(iv.length for iv in merge_intervals(intervals))


def union_area(rects: Sequence[tuple[float, float, float, float]]) -> float:
    """Area of the union of ``(x0, y0, x1, y1)`` rectangles.

    Sweeps the distinct x coordinates; each vertical slab contributes its
    width times the union length of the y-extents of rectangles spanning it.
    """
    rects = [r for r in rects if r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    xs = sorted({r[0] for r in rects} | {r[2] for r in rects})
    total = 0.0
    for left, right in zip(xs, xs[1:]):
        spans = [Interval(r[1], r[3]) for r in rects if r[0] <= left and r[2] >= right]
        if spans:
            total += (right - left) * union_length(spans)
    return total


def intersection(a: BoundingBox, b: BoundingBox) -> tuple[float, float, float, float] | None:
    x0, y0 = max(a.x_min, b.x_min), max(a.y_min, b.y_min)
    x1, y1 = min(a.x_max, b.x_max), min(a.y_max, b.y_max)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1, y1)
