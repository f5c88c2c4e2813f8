# =============================================================================
# EVALUATION MODULE - Report Emission
# File: modules/evaluation/report.py
# =============================================================================

import csv
import json
from pathlib import Path

import logging

from ..core.errors import DatasetFormatError, ReportWriteError
from ..simulation.dataset_io import SCHEMA_VERSION, read_jsonl, write_jsonl
from .pipeline import MetricsReport

logger = logging.getLogger(__name__)

FRAMES_SCHEMA = "glintgaze.frames"

SUMMARY_COLUMNS = [
    "variant", "detection_source", "cornea_mode", "mapper",
    "frames", "evaluated", "rejected",
    "mean_ae", "std_ae", "q1_ae", "q2_ae", "q3_ae", "max_ae",
    "lee_mean", "presence_accuracy",
    "cornea_3d_mean_mm", "cornea_3d_std_mm", "cornea_2d_mean_px",
    "classical_distance_mean_mm", "classical_distance_std_mm",
]


def summary_rows(report: MetricsReport):
    rows = []
    for name, m in report.variants.items():
        rows.append({
            "variant": name,
            "detection_source": m.variant.detection_source,
            "cornea_mode": m.variant.cornea_mode,
            "mapper": m.variant.mapper,
            "frames": m.total,
            "evaluated": m.evaluated,
            "rejected": m.rejected,
            "mean_ae": m.ae.mean,
            "std_ae": m.ae.std,
            "q1_ae": m.ae.q1,
            "q2_ae": m.ae.q2,
            "q3_ae": m.ae.q3,
            "max_ae": m.ae.max,
            "lee_mean": m.lee_mean,
            "presence_accuracy": m.presence_accuracy,
            "cornea_3d_mean_mm": m.cornea_3d.mean,
            "cornea_3d_std_mm": m.cornea_3d.std,
            "cornea_2d_mean_px": m.cornea_2d.mean,
            "classical_distance_mean_mm": m.classical_distance.mean,
            "classical_distance_std_mm": m.classical_distance.std,
        })
    return rows


def direction_rows(report: MetricsReport):
    return [{"variant": name, "direction": direction, "frames": s.count, "mean_ae": s.mean, "std_ae": s.std}
            for name, m in report.variants.items() for direction, s in m.by_direction.items()]


def depth_rows(report: MetricsReport):
    return [{"variant": name, "depth_m": depth, "frames": s.count, "mean_ae": s.mean, "std_ae": s.std,
             "q2_ae": s.q2}
            for name, m in report.variants.items() for depth, s in m.by_depth.items()]


def histogram_rows(report: MetricsReport):
    return [{"variant": name, "bin_lower": lo, "bin_upper": hi, "count": count}
            for name, m in report.variants.items() for lo, hi, count in m.histogram]


def _write(path, writer):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='') as f:
            writer(f)
    except OSError as e:
        raise ReportWriteError(path, e) from e
    logger.info(f"Wrote {path}")
    return path


def write_csv(path, rows, columns=None):
    columns = columns or (list(rows[0]) if rows else [])

    def writer(f):
        out = csv.DictWriter(f, fieldnames=columns, lineterminator='\n')
        out.writeheader()
        out.writerows(rows)

    return _write(Path(path), writer)


def write_json(path, data):
    return _write(Path(path), lambda f: f.write(json.dumps(data, indent=2, sort_keys=True) + "\n"))


def emit_report(report: MetricsReport, out_dir, fmt="csv"):
    """Summary table, per-direction, per-depth and histogram tables, and the full metrics file"""
    if fmt not in ("csv", "json"):
        raise ValueError(f"Unknown report format {fmt!r}")
    out_dir = Path(out_dir)
    rows = summary_rows(report)
    paths = []
    if fmt == "csv":
        paths.append(write_csv(out_dir / "summary.csv", rows, SUMMARY_COLUMNS))
    else:
        paths.append(write_json(out_dir / "summary.json", {"config_hash": report.config_hash, "rows": rows}))
    paths.append(write_csv(out_dir / "by_direction.csv", direction_rows(report),
                           ["variant", "direction", "frames", "mean_ae", "std_ae"]))
    paths.append(write_csv(out_dir / "by_depth.csv", depth_rows(report),
                           ["variant", "depth_m", "frames", "mean_ae", "std_ae", "q2_ae"]))
    paths.append(write_csv(out_dir / "histogram.csv", histogram_rows(report),
                           ["variant", "bin_lower", "bin_upper", "count"]))
    paths.append(write_json(out_dir / "metrics.json", report.to_dict()))
    return paths


def write_frame_records(report: MetricsReport, out_dir):
    paths = []
    for name, records in report.records.items():
        path = Path(out_dir) / f"frames_{name}.jsonl"
        header = {"schema": FRAMES_SCHEMA, "schema_version": SCHEMA_VERSION, "config_hash": report.config_hash,
                  "variant": name}
        try:
            write_jsonl(path, header, (r.to_dict() for r in records))
        except OSError as e:
            raise ReportWriteError(path, e) from e
        paths.append(path)
    return paths


def load_report(path) -> MetricsReport:
    try:
        with open(path, 'r') as f:
            return MetricsReport.from_dict(json.load(f))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"Cannot read metrics {path}: {e}") from e


def read_frame_records(path):
    return read_jsonl(path, FRAMES_SCHEMA)[1]
