"""Evaluation reports and plot-data tables with deterministic serialization.

Floats are rounded to 6 significant digits before being written, JSON keys
are sorted and rows keep a fixed order, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Iterable, Sequence

from weedspray import __version__
from weedspray.geometry import Dataset
from weedspray.ingest import DatasetStats, dataset_stats
from weedspray.metrics import EvalConfig, MapResult, mean_average_precision
from weedspray.planner import SprayerGeometry
from weedspray.spray import SprayReport, spray_sweep

REPORT_SCHEMA_VERSION = 1

SPRAY_COLUMNS = (
    "nozzle_count",
    "weed_coverage_rate",
    "area_sprayed",
    "herbicide_saving",
    "weeds_total",
    "weeds_sprayed",
)


def round_sig(x: float, digits: int = 6) -> float:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} in report")
    return float(f"{x:.{digits}g}")


def fmt(value: Any) -> str:
    """Text form of a report cell: ints verbatim, floats at 6 significant digits."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(round_sig(value))
    return str(value)


def threshold_key(t: float) -> str:
    return f"{t:g}"


def _normalize(obj: Any) -> Any:
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_normalize(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def file_digest(path: str | Path) -> str:
    """sha256 of a file, or of every file under a directory in sorted order."""
    path = Path(path)
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for f in files:
        if path.is_dir():
            h.update(f.relative_to(path).as_posix().encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def map_to_json(m: MapResult) -> dict[str, Any]:
    return {
        "overall": m.overall,
        "per_class": {str(c): v for c, v in m.per_class.items()},
        "per_class_per_threshold": {
            str(c): {threshold_key(t): v for t, v in row.items()}
            for c, row in m.per_class_per_threshold.items()
        },
    }


def stats_to_json(s: DatasetStats) -> dict[str, Any]:
    out = asdict(s)
    out["per_class"] = {str(c): asdict(cs) for c, cs in s.per_class.items()}
    return out


def build_report(
    dataset: Dataset,
    config: EvalConfig,
    nozzle_counts: Sequence[int],
    margin: float,
    model: str = "detections",
    inputs: Sequence[str | Path] = (),
    geometry: SprayerGeometry | None = None,
    timestamp: str | None = None,
) -> dict[str, Any]:
    """Run mAP, the nozzle sweep and dataset statistics into one report document.

    ``timestamp`` is recorded verbatim; leave it ``None`` for reproducible
    output.
    """
    images = list(dataset.images)
    m = mean_average_precision(images, config)
    sweep = spray_sweep(images, nozzle_counts, margin)
    doc: dict[str, Any] = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "dataset": dataset.name,
        "model": model,
        "config": {
            "iou_thresholds": list(config.iou_thresholds),
            "classes": list(config.classes),
            "ap_mode": config.ap_mode,
            "nozzle_counts": [r.nozzle_count for r in sweep],
            "margin_px": margin,
        },
        "map": map_to_json(m),
        "spray": [asdict(r) for r in sweep],
        "stats": stats_to_json(dataset_stats(dataset)),
        "provenance": {
            "tool_version": __version__,
            "inputs": {Path(p).name: file_digest(p) for p in inputs},
            "timestamp": timestamp,
        },
    }
    if geometry is not None:
        doc["config"]["geometry"] = asdict(geometry)
    return doc


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def spray_csv(rows: Sequence[SprayReport] | Sequence[dict[str, Any]]) -> str:
    dicts = [r if isinstance(r, dict) else asdict(r) for r in rows]
    return csv_text(SPRAY_COLUMNS, ([d[c] for c in SPRAY_COLUMNS] for d in dicts))


def map_csv(map_doc: dict[str, Any]) -> str:
    rows = []
    for cls, row in map_doc["per_class_per_threshold"].items():
        for t, v in row.items():
            rows.append((cls, t, v))
    for cls, v in map_doc["per_class"].items():
        rows.append((cls, "mean", v))
    rows.append(("all", "mean", map_doc["overall"]))
    return csv_text(("class_id", "iou_threshold", "ap"), rows)


def write_report(doc: dict[str, Any], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": dumps(doc),
        "spray.csv": spray_csv(doc["spray"]),
        "map.csv": map_csv(doc["map"]),
    }
    written = []
    for name, text in files.items():
        path = out_dir / name
        path.write_bytes(text.encode("utf-8"))
        written.append(path)
    return written


PLOT_SERIES = {
    "nozzles_wcr.csv": ("model", "nozzles", "weed_coverage_rate"),
    "nozzles_area.csv": ("model", "nozzles", "area_sprayed"),
    "map_wcr.csv": ("model", "nozzles", "map", "weed_coverage_rate"),
    "map_area.csv": ("model", "nozzles", "map", "area_sprayed"),
}


def plot_data(reports: Sequence[dict[str, Any]]) -> dict[str, str]:
    """Tidy CSV series for nozzles-vs-metric plots and mAP-vs-metric scatters.

    The mAP scatters compare models, so they only get rows when more than
    one report is given; otherwise they are written with just a header.
    """
    series: dict[str, list[tuple]] = {name: [] for name in PLOT_SERIES}
    scatter = len(reports) > 1
    for doc in reports:
        model, overall = doc["model"], doc["map"]["overall"]
        for row in sorted(doc["spray"], key=lambda r: r["nozzle_count"]):
            n = row["nozzle_count"]
            series["nozzles_wcr.csv"].append((model, n, row["weed_coverage_rate"]))
            series["nozzles_area.csv"].append((model, n, row["area_sprayed"]))
            if scatter:
                series["map_wcr.csv"].append((model, n, overall, row["weed_coverage_rate"]))
                series["map_area.csv"].append((model, n, overall, row["area_sprayed"]))
    for name, rows in series.items():
        # model-major for line series, nozzle-major for scatters; independent of argument order
        rows.sort(key=(lambda r: (r[1], r[0])) if name.startswith("map_") else (lambda r: (r[0], r[1])))
    return {name: csv_text(PLOT_SERIES[name], rows) for name, rows in series.items()}
