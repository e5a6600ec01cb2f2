"""Annotation loading, data preparation (rescale, split) and dataset statistics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from weedspray.geometry import (
    DEFAULT_CLASS_NAMES,
    BoundingBox,
    Dataset,
    ImageRecord,
    clip_box,
    intersection,
    union_area,
)

SCHEMA_VERSION = 1
YOLO_INDEX = "index.csv"
YOLO_LABELS = "labels"
YOLO_DETECTIONS = "detections"
# normalized YOLO values may overshoot 1 by detector round-off
_YOLO_MAX = 1.0001


class IngestError(ValueError):
    """Raised for unreadable or invalid annotation input."""


def _make_box(
    raw: tuple[float, float, float, float],
    class_id: int,
    confidence: float | None,
    width: float,
    height: float,
    where: str,
) -> BoundingBox:
    corners = clip_box(*raw, width, height)
    try:
        return BoundingBox(*corners, class_id=class_id, confidence=confidence)
    except ValueError as exc:
        raise IngestError(f"{where}: {exc}") from None


# -- YOLO text ----------------------------------------------------------------


def parse_yolo_image(
    lines: str,
    width: float,
    height: float,
    has_confidence: bool = False,
    source: str = "<text>",
) -> list[BoundingBox]:
    """Parse YOLO ``class cx cy w h [conf]`` lines into pixel corner boxes."""
    expected = 6 if has_confidence else 5
    boxes = []
    for lineno, line in enumerate(lines.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        where = f"{source}:{lineno}"
        if len(fields) != expected:
            raise IngestError(f"{where}: expected {expected} fields, got {len(fields)}")
        try:
            class_id = int(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError:
            raise IngestError(f"{where}: non-numeric field in {line.strip()!r}") from None
        cx, cy, w, h = values[:4]
        for v in (cx, cy, w, h):
            if not 0.0 <= v <= _YOLO_MAX:
                raise IngestError(f"{where}: normalized value {v} outside [0, 1]")
        conf = values[4] if has_confidence else None
        if conf is not None and not 0.0 <= conf <= 1.0:
            raise IngestError(f"{where}: confidence {conf} outside [0, 1]")
        raw = (
            (cx - w / 2) * width,
            (cy - h / 2) * height,
            (cx + w / 2) * width,
            (cy + h / 2) * height,
        )
        boxes.append(_make_box(raw, class_id, conf, width, height, where))
    return boxes


def format_yolo_image(boxes: list[BoundingBox], width: float, height: float) -> str:
    out = []
    for b in boxes:
        fields = [
            str(b.class_id),
            repr((b.x_min + b.x_max) / 2 / width),
            repr((b.y_min + b.y_max) / 2 / height),
            repr(b.width / width),
            repr(b.height / height),
        ]
        if b.confidence is not None:
            fields.append(repr(b.confidence))
        out.append(" ".join(fields))
    return "\n".join(out) + ("\n" if out else "")


def read_yolo_index(path: Path) -> dict[str, tuple[int, int]]:
    """Read the ``image_id,width,height`` sidecar index."""
    if not path.is_file():
        raise IngestError(f"missing image-size index {path}")
    sizes: dict[str, tuple[int, int]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                image_id = row["image_id"]
                size = (int(row["width"]), int(row["height"]))
            except (KeyError, TypeError, ValueError):
                raise IngestError(f"{path}: malformed index row {row}") from None
            if image_id in sizes:
                raise IngestError(f"{path}: duplicate image_id {image_id!r}")
            sizes[image_id] = size
    return sizes


def read_yolo_boxes(
    directory: Path, sizes: dict[str, tuple[int, int]], has_confidence: bool
) -> dict[str, list[BoundingBox]]:
    """Read ``<image_id>.txt`` files from ``directory``; absent files mean no boxes."""
    boxes = {}
    for path in sorted(directory.glob("*.txt")):
        image_id = path.stem
        if image_id not in sizes:
            raise IngestError(f"{path}: image_id {image_id!r} not in index")
        w, h = sizes[image_id]
        boxes[image_id] = parse_yolo_image(
            path.read_text(encoding="utf-8"), w, h, has_confidence, source=str(path)
        )
    return boxes


def _load_yolo_dir(root: Path) -> Dataset:
    sizes = read_yolo_index(root / YOLO_INDEX)
    gt = read_yolo_boxes(root / YOLO_LABELS, sizes, has_confidence=False)
    det_dir = root / YOLO_DETECTIONS
    det = read_yolo_boxes(det_dir, sizes, has_confidence=True) if det_dir.is_dir() else {}
    images = [
        _image(image_id, w, h, gt.get(image_id, ()), det.get(image_id, ()))
        for image_id, (w, h) in sizes.items()
    ]
    return Dataset(name=root.name, images=images)


def save_yolo_dir(d: Dataset, root: Path) -> None:
    (root / YOLO_LABELS).mkdir(parents=True, exist_ok=True)
    with (root / YOLO_INDEX).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "width", "height"])
        for im in d.images:
            writer.writerow([im.image_id, im.width, im.height])
    has_det = any(im.detections for im in d.images)
    if has_det:
        (root / YOLO_DETECTIONS).mkdir(exist_ok=True)
    for im in d.images:
        (root / YOLO_LABELS / f"{im.image_id}.txt").write_text(
            format_yolo_image(list(im.ground_truth), im.width, im.height), encoding="utf-8"
        )
        if has_det:
            (root / YOLO_DETECTIONS / f"{im.image_id}.txt").write_text(
                format_yolo_image(list(im.detections), im.width, im.height), encoding="utf-8"
            )


# -- canonical JSON -------------------------------------------------------------


def _image(image_id, width, height, gt, det) -> ImageRecord:
    try:
        return ImageRecord(image_id, width, height, tuple(gt), tuple(det))
    except ValueError as exc:
        raise IngestError(str(exc)) from None


def _box_from_json(obj: Any, width: int, height: int, where: str, detection: bool) -> BoundingBox:
    if not isinstance(obj, dict):
        raise IngestError(f"{where}: box must be an object")
    try:
        raw = (
            float(obj["x_min"]),
            float(obj["y_min"]),
            float(obj["x_max"]),
            float(obj["y_max"]),
        )
        class_id = int(obj["class_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"{where}: bad or missing box field {exc}") from None
    conf = obj.get("confidence")
    if detection:
        if conf is None:
            raise IngestError(f"{where}: detection without confidence")
        conf = float(conf)
    elif conf is not None:
        raise IngestError(f"{where}: ground truth box carries a confidence")
    return _make_box(raw, class_id, conf, width, height, where)


def dataset_from_json(doc: Any, source: str = "<json>") -> Dataset:
    if not isinstance(doc, dict) or not isinstance(doc.get("images", []), list):
        raise IngestError(f"{source}: expected an object with an 'images' list")
    classes = doc.get("classes")
    try:
        class_names = (
            {int(k): str(v) for k, v in classes.items()}
            if classes is not None
            else dict(DEFAULT_CLASS_NAMES)
        )
    except (AttributeError, ValueError):
        raise IngestError(f"{source}: 'classes' must map integer ids to names") from None
    images = []
    seen: set[str] = set()
    for idx, entry in enumerate(doc.get("images", [])):
        try:
            image_id = str(entry["id"])
            width, height = int(entry["width"]), int(entry["height"])
        except (KeyError, TypeError, ValueError):
            raise IngestError(f"{source}: images[{idx}] lacks id/width/height") from None
        if image_id in seen:
            raise IngestError(f"{source}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        where = f"{source}: image {image_id!r}"
        gt = [
            _box_from_json(b, width, height, f"{where} ground_truth[{i}]", False)
            for i, b in enumerate(entry.get("ground_truth", []))
        ]
        det = [
            _box_from_json(b, width, height, f"{where} detections[{i}]", True)
            for i, b in enumerate(entry.get("detections", []))
        ]
        images.append(_image(image_id, width, height, gt, det))
    return Dataset(name=str(doc.get("name", Path(source).stem)), images=images, class_names=class_names)


def _box_to_json(b: BoundingBox) -> dict[str, Any]:
    out: dict[str, Any] = {
        "x_min": b.x_min,
        "y_min": b.y_min,
        "x_max": b.x_max,
        "y_max": b.y_max,
        "class_id": b.class_id,
    }
    if b.confidence is not None:
        out["confidence"] = b.confidence
    return out


def dataset_to_json(d: Dataset) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": d.name,
        "classes": {str(k): v for k, v in sorted(d.class_names.items())},
        "images": [
            {
                "id": im.image_id,
                "width": im.width,
                "height": im.height,
                "ground_truth": [_box_to_json(b) for b in im.ground_truth],
                "detections": [_box_to_json(b) for b in im.detections],
            }
            for im in d.images
        ],
    }


def save_dataset(d: Dataset, path: str | Path) -> None:
    text = json.dumps(dataset_to_json(d), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_dataset(path: str | Path, format: str = "canonical_json") -> Dataset:
    """Load a dataset from a canonical JSON file or a YOLO directory.

    A YOLO directory holds ``index.csv`` (``image_id,width,height``),
    ``labels/<image_id>.txt`` and optionally ``detections/<image_id>.txt``.
    """
    path = Path(path)
    if format in ("canonical_json", "json"):
        if not path.is_file():
            raise IngestError(f"missing file {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}: invalid JSON ({exc})") from None
        return dataset_from_json(doc, source=str(path))
    if format in ("yolo_dir", "yolo"):
        if not path.is_dir():
            raise IngestError(f"missing directory {path}")
        return _load_yolo_dir(path)
    raise IngestError(f"unknown dataset format {format!r}")


def attach_detections(gt: Dataset, det: Dataset) -> Dataset:
    """Replace the detections of ``gt`` with those from ``det``, matched by image id.

    Images absent from ``det`` get no detections.
    """
    by_id = {im.image_id: im for im in det.images}
    unknown = sorted(set(by_id) - {im.image_id for im in gt.images})
    if unknown:
        raise IngestError(f"detections reference unknown image_id {unknown[0]!r}")
    images = []
    for im in gt.images:
        other = by_id.get(im.image_id)
        if other is not None and (other.width, other.height) != (im.width, im.height):
            raise IngestError(f"image {im.image_id!r}: detection image size differs from ground truth")
        images.append(replace(im, detections=other.detections if other else ()))
    return replace(gt, images=tuple(images))


def load_detections(path: str | Path, format: str, reference: Dataset) -> Dataset:
    """Load detector output and attach it to ``reference``.

    For ``yolo`` the path is a directory of ``<image_id>.txt`` files with a
    confidence column; image sizes come from ``reference``.
    """
    path = Path(path)
    if format in ("yolo_dir", "yolo"):
        if not path.is_dir():
            raise IngestError(f"missing directory {path}")
        sizes = {im.image_id: (im.width, im.height) for im in reference.images}
        boxes = read_yolo_boxes(path, sizes, has_confidence=True)
        return replace(
            reference,
            images=tuple(replace(im, detections=tuple(boxes.get(im.image_id, ()))) for im in reference.images),
        )
    return attach_detections(reference, load_dataset(path, format))


# -- data preparation -------------------------------------------------------------


def rescale_dataset(d: Dataset, target_width: int, target_height: int) -> Dataset:
    """Resize every image (and its boxes) to ``target_width x target_height``.

    The target must keep each image's width/height ratio.
    """
    if target_width <= 0 or target_height <= 0:
        raise IngestError("target dimensions must be positive")
    target_ratio = target_width / target_height
    images = []
    for im in d.images:
        if abs(im.width / im.height - target_ratio) > 1e-6:
            raise IngestError(
                f"image {im.image_id!r}: aspect {im.width}x{im.height} does not match "
                f"{target_width}x{target_height}"
            )

        def scale(b: BoundingBox) -> BoundingBox:
            # (x * tw) / w keeps x == w mapping exactly to tw
            return BoundingBox(
                min(b.x_min * target_width / im.width, target_width),
                min(b.y_min * target_height / im.height, target_height),
                min(b.x_max * target_width / im.width, target_width),
                min(b.y_max * target_height / im.height, target_height),
                b.class_id,
                b.confidence,
            )

        images.append(
            ImageRecord(
                im.image_id,
                target_width,
                target_height,
                tuple(scale(b) for b in im.ground_truth),
                tuple(scale(b) for b in im.detections),
            )
        )
    return replace(d, images=tuple(images))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    test_fraction: float = 0.2
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (self.train_fraction, self.test_fraction, self.val_fraction)
        if any(f < 0 for f in fractions):
            raise ValueError("split fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fractions)}, not 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # epsilon guards products like 0.29 * 100 = 28.999999999999996
    n_test = math.floor(spec.test_fraction * n + 1e-9)
    n_val = math.floor(spec.val_fraction * n + 1e-9)
    return n - n_test - n_val, n_test, n_val


def split_dataset(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle images with a seeded PCG64 generator and cut train/test/val.

    Test and validation sizes are ``floor(fraction * N)``; the remainder
    goes to training.
    """
    n_train, n_test, _ = split_sizes(len(d.images), spec)
    order = np.random.Generator(np.random.PCG64(spec.seed)).permutation(len(d.images))
    shuffled = [d.images[i] for i in order]
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_test],
        shuffled[n_train + n_test :],
    )
    return tuple(  # type: ignore[return-value]
        replace(d, name=f"{d.name}-{suffix}", images=tuple(part))
        for suffix, part in zip(("train", "test", "val"), parts)
    )


# -- statistics -----------------------------------------------------------------


@dataclass(frozen=True)
class ClassStats:
    count: int
    avg_per_image: float
    avg_occluded_fraction: float
    avg_area_fraction: float


@dataclass(frozen=True)
class DatasetStats:
    image_count: int
    item_count: int
    avg_items_per_image: float
    avg_box_occluded_fraction: float
    avg_image_area_occupied: float
    avg_box_area_fraction: float
    per_class: dict[int, ClassStats]


def occluded_fraction(box: BoundingBox, others: list[BoundingBox]) -> float:
    """Fraction of ``box`` covered by the union of ``others``."""
    clipped = [r for r in (intersection(box, o) for o in others) if r is not None]
    return union_area(clipped) / box.area


def dataset_stats(d: Dataset) -> DatasetStats:
    """Table-style statistics over the ground-truth boxes of ``d``.

    Occlusion of a box is the share of its area covered by the union of the
    other boxes in the same image.
    """
    if not d.images:
        raise IngestError(f"dataset {d.name!r} is empty; statistics undefined")
    occupied = []
    box_rows: list[tuple[int, float, float]] = []  # (class_id, occluded, area fraction)
    for im in sorted(d.images, key=lambda im: im.image_id):
        boxes = list(im.ground_truth)
        occupied.append(union_area([b.corners for b in boxes]) / im.area)
        for i, b in enumerate(boxes):
            occ = occluded_fraction(b, boxes[:i] + boxes[i + 1 :])
            box_rows.append((b.class_id, occ, b.area / im.area))

    n_images = len(d.images)

    def mean(values: list[float]) -> float:
        return math.fsum(values) / len(values) if values else 0.0

    per_class = {}
    for cls in sorted({row[0] for row in box_rows}):
        rows = [r for r in box_rows if r[0] == cls]
        per_class[cls] = ClassStats(
            count=len(rows),
            avg_per_image=len(rows) / n_images,
            avg_occluded_fraction=mean([r[1] for r in rows]),
            avg_area_fraction=mean([r[2] for r in rows]),
        )
    return DatasetStats(
        image_count=n_images,
        item_count=len(box_rows),
        avg_items_per_image=len(box_rows) / n_images,
        avg_box_occluded_fraction=mean([r[1] for r in box_rows]),
        avg_image_area_occupied=mean(occupied),
        avg_box_area_fraction=mean([r[2] for r in box_rows]),
        per_class=per_class,
    )
