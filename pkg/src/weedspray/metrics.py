"""Detection matching, precision/recall, AP and mAP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from weedspray.geometry import BoundingBox, ImageRecord, iou

DEFAULT_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

AP_MODES = ("pr_curve", "paper_literal")


class UndefinedMetricError(ValueError):
    """A metric's denominator is empty (e.g. a class with no ground truth)."""


@dataclass(frozen=True)
class DetectionFlag:
    confidence: float
    is_tp: bool


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn_: int
    matched_pairs: tuple[tuple[int, int, float], ...] = ()
    per_detection_flags: tuple[DetectionFlag, ...] = ()


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float
    confidence_cutoff: float


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    classes: tuple[int, ...] = (0, 1)
    ap_mode: str = "pr_curve"

    def __post_init__(self) -> None:
        object.__setattr__(self, "iou_thresholds", tuple(self.iou_thresholds))
        object.__setattr__(self, "classes", tuple(self.classes))
        ts = self.iou_thresholds
        if not ts:
            raise ValueError("at least one IoU threshold is required")
        if any(not 0.0 < t <= 1.0 for t in ts):
            raise ValueError(f"IoU thresholds must lie in (0, 1]: {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"IoU thresholds must be strictly increasing: {ts}")
        if self.ap_mode not in AP_MODES:
            raise ValueError(f"unknown ap_mode {self.ap_mode!r}")


def match_detections(
    gt: Sequence[BoundingBox],
    det: Sequence[BoundingBox],
    class_id: int,
    iou_threshold: float,
) -> MatchResult:
    """Greedy matching of one image's detections of ``class_id`` to ground truth.

    Detections are visited by descending confidence (stable on input order);
    each takes the still-unmatched ground-truth box of highest IoU if that
    IoU reaches the threshold. Indices in ``matched_pairs`` refer to the
    input sequences.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"IoU threshold {iou_threshold} outside (0, 1]")
    gt_idx = [i for i, g in enumerate(gt) if g.class_id == class_id]
    det_idx = [i for i, d in enumerate(det) if d.class_id == class_id]
    det_idx.sort(key=lambda i: -(det[i].confidence or 0.0))

    taken: set[int] = set()
    pairs = []
    flags = []
    for di in det_idx:
        best, best_iou = None, 0.0
        for gi in gt_idx:
            if gi in taken:
                continue
            v = iou(det[di], gt[gi])
            if v > best_iou:
                best, best_iou = gi, v
        hit = best is not None and best_iou >= iou_threshold
        if hit:
            taken.add(best)
            pairs.append((di, best, best_iou))
        flags.append(DetectionFlag(det[di].confidence or 0.0, hit))
    tp = len(pairs)
    return MatchResult(
        tp=tp,
        fp=len(det_idx) - tp,
        fn_=len(gt_idx) - tp,
        matched_pairs=tuple(pairs),
        per_detection_flags=tuple(flags),
    )


def precision_recall(m: MatchResult) -> tuple[float, float]:
    """Precision and recall; precision is 1.0 when nothing was detected."""
    precision = m.tp / (m.tp + m.fp) if m.tp + m.fp else 1.0
    recall = m.tp / (m.tp + m.fn_) if m.tp + m.fn_ else 0.0
    return precision, recall


def _pooled_flags(
    images: Sequence[ImageRecord], class_id: int, iou_threshold: float
) -> tuple[list[DetectionFlag], int]:
    flags: list[DetectionFlag] = []
    n_gt = 0
    for im in sorted(images, key=lambda im: im.image_id):
        m = match_detections(im.ground_truth, im.detections, class_id, iou_threshold)
        flags.extend(m.per_detection_flags)
        n_gt += m.tp + m.fn_
    return flags, n_gt


def _sweep(flags: list[DetectionFlag], n_gt: int) -> tuple[list[PRPoint], list[int]]:
    """Cumulative PR points, one per distinct confidence (ties form one group).

    Also returns the TP count gained at each point.
    """
    ordered = sorted(flags, key=lambda f: -f.confidence)
    points: list[PRPoint] = []
    gains: list[int] = []
    tp = fp = 0
    i = 0
    while i < len(ordered):
        cutoff = ordered[i].confidence
        gained = 0
        while i < len(ordered) and ordered[i].confidence == cutoff:
            if ordered[i].is_tp:
                tp += 1
                gained += 1
            else:
                fp += 1
            i += 1
        points.append(PRPoint(tp / (tp + fp), tp / n_gt, cutoff))
        gains.append(gained)
    return points, gains


def pr_curve(images: Sequence[ImageRecord], class_id: int, iou_threshold: float) -> list[PRPoint]:
    flags, n_gt = _pooled_flags(images, class_id, iou_threshold)
    if n_gt == 0:
        raise UndefinedMetricError(f"class {class_id} has no ground-truth boxes; AP undefined")
    return _sweep(flags, n_gt)[0]


def average_precision(images: Sequence[ImageRecord], class_id: int, iou_threshold: float) -> float:
    """All-point interpolated AP over the pooled confidence sweep.

    Each point's precision is replaced by the maximum precision at any
    later (higher-recall) point before summing ``(R_k - R_{k-1}) * P_k``.
    """
    flags, n_gt = _pooled_flags(images, class_id, iou_threshold)
    if n_gt == 0:
        raise UndefinedMetricError(f"class {class_id} has no ground-truth boxes; AP undefined")
    points, gains = _sweep(flags, n_gt)
    envelope = [p.precision for p in points]
    for k in range(len(envelope) - 2, -1, -1):
        envelope[k] = max(envelope[k], envelope[k + 1])
    # R_k - R_{k-1} == gains[k] / n_gt; dividing once keeps a perfect curve at exactly 1.0
    return sum(p * g for p, g in zip(envelope, gains)) / n_gt


def pooled_precision_recall(
    images: Sequence[ImageRecord], class_id: int, iou_threshold: float
) -> tuple[float, float]:
    tp = fp = fn = 0
    for im in sorted(images, key=lambda im: im.image_id):
        m = match_detections(im.ground_truth, im.detections, class_id, iou_threshold)
        tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn_
    return precision_recall(MatchResult(tp, fp, fn))


def literal_threshold_ap(
    images: Sequence[ImageRecord], class_id: int, thresholds: Sequence[float]
) -> dict[float, float]:
    """Per-threshold terms of ``sum_n (R_n - R_{n-1}) * P_n`` with n ranking IoU thresholds.

    Thresholds are ranked strictest first so that recall is non-decreasing;
    ``R_0 = 0``. Summing the returned values gives the class score.
    """
    terms: dict[float, float] = {}
    prev_recall = 0.0
    for t in sorted(thresholds, reverse=True):
        p, r = pooled_precision_recall(images, class_id, t)
        terms[t] = (r - prev_recall) * p
        prev_recall = r
    return terms


@dataclass(frozen=True)
class MapResult:
    per_class: dict[int, float]
    overall: float
    per_class_per_threshold: dict[int, dict[float, float]] = field(default_factory=dict)


def mean_average_precision(images: Sequence[ImageRecord], config: EvalConfig | None = None) -> MapResult:
    """AP per class and threshold, averaged over thresholds then classes."""
    config = config or EvalConfig()
    if not config.classes:
        raise ValueError("no classes configured")
    per_class: dict[int, float] = {}
    table: dict[int, dict[float, float]] = {}
    for cls in config.classes:
        if not any(g.class_id == cls for im in images for g in im.ground_truth):
            raise UndefinedMetricError(f"class {cls} has no ground-truth boxes; AP undefined")
        if config.ap_mode == "pr_curve":
            row = {t: average_precision(images, cls, t) for t in config.iou_thresholds}
            per_class[cls] = sum(row.values()) / len(row)
        else:
            row = literal_threshold_ap(images, cls, config.iou_thresholds)
            per_class[cls] = sum(row[t] for t in sorted(row, reverse=True))
            row = {t: row[t] for t in config.iou_thresholds}
        table[cls] = row
    overall = sum(per_class.values()) / len(per_class)
    return MapResult(per_class=per_class, overall=overall, per_class_per_threshold=table)
