"""Deployment-oriented evaluation of weed detectors for precision spraying."""

from weedspray.geometry import (
    CROP,
    WEED,
    BoundingBox,
    Dataset,
    ImageRecord,
    Interval,
    iou,
    merge_intervals,
    union_area,
    union_length,
)

__version__ = "0.1.0"

__all__ = [
    "CROP",
    "WEED",
    "BoundingBox",
    "Dataset",
    "ImageRecord",
    "Interval",
    "iou",
    "merge_intervals",
    "union_area",
    "union_length",
    "__version__",
]
