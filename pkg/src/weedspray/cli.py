"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from weedspray import ingest, planner, report
from weedspray.ingest import IngestError, SplitSpec
from weedspray.metrics import DEFAULT_IOU_THRESHOLDS, AP_MODES, EvalConfig, UndefinedMetricError
from weedspray.synth import CONFIDENCE_MODELS, FieldParams, NoiseParams, generate_field, perturb_detections

SPEED_UNITS = {"mph": planner.MPS_PER_MPH * planner.MM_PER_M, "m/s": planner.MM_PER_M, "mm/s": 1.0}
LENGTH_UNITS = {"m": planner.MM_PER_M, "mm": 1.0}
ORIENTATION_FLAGS = {"long": planner.LONG_EDGE_ALONG_BOOM, "short": planner.SHORT_EDGE_ALONG_BOOM}
INPUT_ERRORS = (IngestError, UndefinedMetricError, ValueError, OSError)


class UsageError(Exception):
    pass


def int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def threshold_list(text: str) -> list[float]:
    """``0.5:0.05:0.95`` (inclusive range) or ``0.5,0.75``."""
    if ":" not in text:
        return float_list(text)
    try:
        start, step, stop = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:step:stop, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("threshold step must be positive")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count) if start + i * step <= stop + 1e-9]


def _add_eval_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ground-truth", required=True, help="canonical JSON file or YOLO directory")
    p.add_argument("--detections", help="detector output; defaults to detections embedded in the ground truth")
    p.add_argument("--format", choices=("json", "yolo"), default="json")


def _add_map_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iou-thresholds", type=threshold_list, default=list(DEFAULT_IOU_THRESHOLDS))
    p.add_argument("--classes", type=int_list, help="class ids to score (default: all with ground truth)")
    p.add_argument("--ap-mode", choices=AP_MODES, default="pr_curve")


def _add_spray_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nozzles", type=int_list, default=[1, 2, 3, 4])
    p.add_argument("--margin-px", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weedspray", description="Evaluate weed detectors for precision spraying."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="mAP, nozzle sweep and dataset statistics into a report")
    _add_eval_inputs(p)
    _add_map_options(p)
    _add_spray_options(p)
    p.add_argument("--model", help="label for this detector (default: detections file stem)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timestamp", help="timestamp to record (default: $SOURCE_DATE_EPOCH, else none)")

    p = sub.add_parser("spray", help="WCR / area sprayed per nozzle count (CSV)")
    _add_eval_inputs(p)
    _add_spray_options(p)
    p.add_argument("--out", help="CSV file (default: stdout)")

    p = sub.add_parser("map", help="AP per class and IoU threshold (CSV)")
    _add_eval_inputs(p)
    _add_map_options(p)
    p.add_argument("--out", help="CSV file (default: stdout)")

    p = sub.add_parser("stats", help="dataset statistics (JSON)")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--format", choices=("json", "yolo"), default="json")
    p.add_argument("--out", help="JSON file (default: stdout)")

    p = sub.add_parser("plan", help="cameras, frame rates and GPUs for a sprayer")
    p.add_argument("--boom", type=float, default=24.0)
    p.add_argument("--boom-unit", choices=LENGTH_UNITS, default="m")
    p.add_argument("--footprint-mm", type=float_list, default=[550.0, 305.0], help="LONG,SHORT")
    p.add_argument("--speed", type=float, default=15.0)
    p.add_argument("--speed-unit", choices=SPEED_UNITS, default="mph")
    p.add_argument("--orientation", choices=ORIENTATION_FLAGS, default="long", help="image edge along the boom")
    p.add_argument("--measured-fps", type=float, help="measured frames per second of one GPU")
    p.add_argument("--output-format", choices=("text", "json", "csv"), default="text")

    p = sub.add_parser("split", help="random train/test/val split")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("json", "yolo"), default="json")
    p.add_argument("--fractions", type=float_list, default=[0.7, 0.2, 0.1], help="TRAIN,TEST,VAL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("rescale", help="resize images and boxes, keeping the aspect ratio")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("json", "yolo"), default="json")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with simulated detections")
    p.add_argument("--images", type=int, default=10)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=360)
    p.add_argument("--weeds", type=float, default=5.0, help="mean weeds per image")
    p.add_argument("--crops", type=float, default=3.0, help="mean crops per image")
    p.add_argument("--box-size", type=int_list, default=[10, 60], help="MIN,MAX pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--miss-rate", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--confidence", choices=CONFIDENCE_MODELS, default="constant")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--no-detections", action="store_true")
    p.add_argument("--output", required=True)

    p = sub.add_parser("plot-data", help="CSV series for nozzle and mAP plots from eval reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _fmt_format(name: str) -> str:
    return "yolo_dir" if name == "yolo" else "canonical_json"


def _load_eval_dataset(args: argparse.Namespace):
    fmt = _fmt_format(args.format)
    gt = ingest.load_dataset(args.ground_truth, fmt)
    if args.detections:
        return ingest.load_detections(args.detections, fmt, gt)
    return gt


def _eval_config(args: argparse.Namespace, dataset) -> EvalConfig:
    classes = args.classes
    if classes is None:
        classes = sorted({g.class_id for im in dataset.images for g in im.ground_truth})
    return EvalConfig(tuple(args.iou_thresholds), tuple(classes), args.ap_mode)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = _load_eval_dataset(args)
    inputs = [args.ground_truth] + ([args.detections] if args.detections else [])
    model = args.model or (Path(args.detections).stem if args.detections else Path(args.ground_truth).stem)
    timestamp = args.timestamp or os.environ.get("SOURCE_DATE_EPOCH")
    doc = report.build_report(
        dataset,
        _eval_config(args, dataset),
        args.nozzles,
        args.margin_px,
        model=model,
        inputs=inputs,
        timestamp=timestamp,
    )
    report.write_report(doc, args.out)
    print(f"mAP {report.fmt(doc['map']['overall'])}")
    for row in doc["spray"]:
        print(
            f"{row['nozzle_count']} nozzles: WCR {report.fmt(row['weed_coverage_rate'])}, "
            f"area sprayed {report.fmt(row['area_sprayed'])}, saving {report.fmt(row['herbicide_saving'])}"
        )
    return 0


def cmd_spray(args: argparse.Namespace) -> int:
    from weedspray.spray import spray_sweep

    dataset = _load_eval_dataset(args)
    _emit(report.spray_csv(spray_sweep(list(dataset.images), args.nozzles, args.margin_px)), args.out)
    return 0


def cmd_map(args: argparse.Namespace) -> int:
    from weedspray.metrics import mean_average_precision

    dataset = _load_eval_dataset(args)
    m = mean_average_precision(list(dataset.images), _eval_config(args, dataset))
    _emit(report.map_csv(report.map_to_json(m)), args.out)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = ingest.load_dataset(args.ground_truth, _fmt_format(args.format))
    _emit(report.dumps(report.stats_to_json(ingest.dataset_stats(dataset))), args.out)
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    if len(args.footprint_mm) != 2:
        raise UsageError("--footprint-mm takes LONG,SHORT")
    long_edge, short_edge = args.footprint_mm
    g = planner.SprayerGeometry(
        boom_length=args.boom * LENGTH_UNITS[args.boom_unit],
        footprint_long=long_edge,
        footprint_short=short_edge,
        speed=args.speed * SPEED_UNITS[args.speed_unit],
        orientation=ORIENTATION_FLAGS[args.orientation],
    )
    plan = planner.plan_throughput(g)
    row = asdict(plan)
    if args.measured_fps is not None:
        row["gpus_required"] = planner.gpu_estimate(plan.total_fps, args.measured_fps)
    if args.output_format == "json":
        sys.stdout.write(report.dumps(row))
    elif args.output_format == "csv":
        sys.stdout.write(report.csv_text(list(row), [list(row.values())]))
    else:
        print(f"{plan.camera_count} cameras, {plan.fps_per_camera} fps, {plan.total_fps} total")
        if "gpus_required" in row:
            print(f"GPUs required: {row['gpus_required']}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    if len(args.fractions) != 3:
        raise UsageError("--fractions takes TRAIN,TEST,VAL")
    dataset = ingest.load_dataset(args.input, _fmt_format(args.format))
    parts = ingest.split_dataset(dataset, SplitSpec(*args.fractions, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "test", "val"), parts):
        ingest.save_dataset(part, out / f"{name}.json")
        print(f"{name}: {len(part)} images")
    return 0


def cmd_rescale(args: argparse.Namespace) -> int:
    dataset = ingest.load_dataset(args.input, _fmt_format(args.format))
    ingest.save_dataset(ingest.rescale_dataset(dataset, args.width, args.height), args.output)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    if len(args.box_size) != 2:
        raise UsageError("--box-size takes MIN,MAX")
    d = generate_field(
        FieldParams(
            image_count=args.images,
            width=args.width,
            height=args.height,
            weeds_per_image=args.weeds,
            crops_per_image=args.crops,
            box_size_range=tuple(args.box_size),
            seed=args.seed,
        )
    )
    if not args.no_detections:
        noise = NoiseParams(args.miss_rate, args.fp_rate, args.jitter, args.confidence, args.noise_seed)
        d = perturb_detections(d, noise)
    ingest.save_dataset(d, args.output)
    return 0


def cmd_plot_data(args: argparse.Namespace) -> int:
    docs = []
    for path in args.reports:
        try:
            docs.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}: invalid report JSON ({exc})") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        tables = report.plot_data(docs)
    except (KeyError, TypeError) as exc:
        raise IngestError(f"malformed report: missing {exc}") from None
    for name, text in tables.items():
        (out / name).write_bytes(text.encode("utf-8"))
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "spray": cmd_spray,
    "map": cmd_map,
    "stats": cmd_stats,
    "plan": cmd_plan,
    "split": cmd_split,
    "rescale": cmd_rescale,
    "synth": cmd_synth,
    "plot-data": cmd_plot_data,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, *INPUT_ERRORS) as exc:
        print(f"weedspray {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"weedspray {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
