# =============================================================================
# EVALUATION MODULE - Experiment Pipeline
# File: modules/evaluation/pipeline.py
# =============================================================================
"""Per subject: simulate the protocol, calibrate a mapper on the 0.5 m plane
frames, then estimate gaze on the remaining frames for every variant.

Subjects run concurrently; every random draw is keyed by (seed, subject,
frame), and records are sorted before aggregation, so the report depends
only on the configuration.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import logging
import torch

from ..core.errors import ConfigError, GlintGazeError, PupilNotFound
from ..cornea.estimator import CorneaSolver
from ..detection.detect_config import DetectConfig
from ..detection.raster_detector import RasterDetector
from ..detection.renderer import render_frame
from ..gaze.calibration import CalibrationSet, calibration_target_axis, map_gaze
from ..gaze.net_mapper import NetTrainingConfig, fit_net_mapper
from ..gaze.poly_mapper import fit_poly_mapper
from ..gaze.pupil_lifting import lift_pupil_to_3d, optical_axis
from ..simulation.frame_synth import NoiseSpec
from ..simulation.protocol import DEPTHS_M, GRID_COLS, GRID_ROWS, EyeSimulator, protocol_targets
from .metrics import (ErrorStats, angular_error_arcmin, error_histogram, error_stats,
                      labeled_euclidean_error, presence_matches, unmatched_labels)
from .variants import VariantSpec, get_variant

logger = logging.getLogger(__name__)

DIRECTION_NAMES = [f"{row} {col}" for row in GRID_ROWS for col in GRID_COLS]


@dataclass(frozen=True)
class RunConfig:
    subjects: int = 20
    frames_per_target: int = 10
    seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    variants: Tuple[VariantSpec, ...] = ()
    workers: int = 4
    histogram_bin_arcmin: float = 10.0
    out_dir: str = "runs"
    format: str = "csv"
    config_hash: str = ""

    def __post_init__(self):
        if self.subjects < 1 or self.frames_per_target < 1:
            raise ConfigError("run.subjects and run.frames_per_target must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"Unknown report format {self.format!r}")
        if not self.histogram_bin_arcmin > 0:
            raise ConfigError("run.histogram_bin_arcmin must be positive")

    @classmethod
    def from_config(cls, config, variant=None, seed=None):
        """Variant names come from run.variants (or the --variant override);
        an empty list runs the single variant spelled out by the run axes."""
        seed = int(config.get('run.seed', 0) if seed is None else seed)
        if variant is not None:
            variants = (get_variant(variant),)
        elif config.get('run.variants'):
            variants = tuple(get_variant(name) for name in config.get('run.variants'))
        else:
            variants = (VariantSpec(
                "custom",
                config.get('run.detection_source', 'noisy-oracle'),
                config.get('run.cornea_mode', 'refine-lift'),
                config.get('run.mapper', 'network'),
            ),)
        return cls(
            subjects=int(config.get('run.subjects', 20)),
            frames_per_target=int(config.get('run.frames_per_target', 10)),
            seed=seed,
            noise=NoiseSpec.from_config(config, seed),
            variants=variants,
            workers=int(config.get('run.workers', 4)),
            histogram_bin_arcmin=float(config.get('run.histogram_bin_arcmin', 10.0)),
            out_dir=str(config.get('run.out_dir', 'runs')),
            format=str(config.get('run.format', 'csv')),
            config_hash=config.config_hash(),
        )


@dataclass
class FrameRecord:
    variant: str
    subject: int
    target: int
    frame: int
    depth_m: float
    direction: str
    status: str = "evaluated"
    error: Optional[str] = None
    ae_arcmin: Optional[float] = None
    cornea_3d_error_mm: Optional[float] = None
    cornea_2d_error_px: Optional[float] = None
    classical_distance_mm: Optional[float] = None
    lee_px: Optional[float] = None
    lee_unmatched: int = 0
    presence_correct: int = 0
    presence_total: int = 0
    gaze: Optional[List[float]] = None

    @property
    def sort_key(self):
        return (self.subject, self.target, self.frame)

    def to_dict(self):
        return asdict(self)


@dataclass
class VariantMetrics:
    variant: VariantSpec
    total: int
    evaluated: int
    rejected: int
    rejections: Dict[str, int]
    calibration_rejections: Dict[str, int]
    ae: ErrorStats
    by_direction: Dict[str, ErrorStats]
    by_depth: Dict[str, ErrorStats]
    lee_mean: float
    lee_unmatched: int
    presence_accuracy: float
    cornea_3d: ErrorStats
    cornea_2d: ErrorStats
    classical_distance: ErrorStats
    histogram: List[Tuple[float, float, int]]

    def to_dict(self):
        return {
            "variant": self.variant.to_dict(),
            "total": self.total,
            "evaluated": self.evaluated,
            "rejected": self.rejected,
            "rejections": dict(sorted(self.rejections.items())),
            "calibration_rejections": dict(sorted(self.calibration_rejections.items())),
            "ae": self.ae.to_dict(),
            "by_direction": {k: v.to_dict() for k, v in self.by_direction.items()},
            "by_depth": {k: v.to_dict() for k, v in self.by_depth.items()},
            "lee_mean": self.lee_mean,
            "lee_unmatched": self.lee_unmatched,
            "presence_accuracy": self.presence_accuracy,
            "cornea_3d": self.cornea_3d.to_dict(),
            "cornea_2d": self.cornea_2d.to_dict(),
            "classical_distance": self.classical_distance.to_dict(),
            "histogram": [list(b) for b in self.histogram],
        }

    @classmethod
    def from_dict(cls, data):
        stats = lambda d: {k: ErrorStats.from_dict(v) for k, v in d.items()}
        return cls(
            variant=VariantSpec(**data["variant"]),
            total=data["total"],
            evaluated=data["evaluated"],
            rejected=data["rejected"],
            rejections=data["rejections"],
            calibration_rejections=data["calibration_rejections"],
            ae=ErrorStats.from_dict(data["ae"]),
            by_direction=stats(data["by_direction"]),
            by_depth=stats(data["by_depth"]),
            lee_mean=data["lee_mean"],
            lee_unmatched=data["lee_unmatched"],
            presence_accuracy=data["presence_accuracy"],
            cornea_3d=ErrorStats.from_dict(data["cornea_3d"]),
            cornea_2d=ErrorStats.from_dict(data["cornea_2d"]),
            classical_distance=ErrorStats.from_dict(data["classical_distance"]),
            histogram=[tuple(b) for b in data["histogram"]],
        )


@dataclass
class MetricsReport:
    config_hash: str
    seed: int
    histogram_bin_arcmin: float
    variants: Dict[str, VariantMetrics]
    thresholds: Dict[str, float] = field(default_factory=dict)
    records: Dict[str, List[FrameRecord]] = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "histogram_bin_arcmin": self.histogram_bin_arcmin,
            "thresholds": self.thresholds,
            "variants": {name: m.to_dict() for name, m in self.variants.items()},
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            config_hash=data["config_hash"],
            seed=data["seed"],
            histogram_bin_arcmin=data["histogram_bin_arcmin"],
            variants={name: VariantMetrics.from_dict(m) for name, m in data["variants"].items()},
            thresholds=data.get("thresholds", {}),
        )


def _mean_or_nan(values):
    return float(np.mean(values)) if values else float('nan')


def aggregate_variant(variant: VariantSpec, records: List[FrameRecord], calibration_rejections,
                      bin_width) -> VariantMetrics:
    evaluated = [r for r in records if r.status == "evaluated"]
    errors = [r.ae_arcmin for r in evaluated]
    by_direction = {name: error_stats(r.ae_arcmin for r in evaluated if r.direction == name)
                    for name in DIRECTION_NAMES}
    depths = sorted({r.depth_m for r in records}, key=DEPTHS_M.index)
    by_depth = {f"{d:g}": error_stats(r.ae_arcmin for r in evaluated if r.depth_m == d) for d in depths}
    presence_total = sum(r.presence_total for r in records)
    return VariantMetrics(
        variant=variant,
        total=len(records),
        evaluated=len(evaluated),
        rejected=len(records) - len(evaluated),
        rejections=dict(Counter(r.error for r in records if r.status == "rejected")),
        calibration_rejections=dict(calibration_rejections),
        ae=error_stats(errors),
        by_direction=by_direction,
        by_depth=by_depth,
        lee_mean=_mean_or_nan([r.lee_px for r in records if r.lee_px is not None]),
        lee_unmatched=sum(r.lee_unmatched for r in records),
        presence_accuracy=sum(r.presence_correct for r in records) / presence_total if presence_total else float('nan'),
        cornea_3d=error_stats(r.cornea_3d_error_mm for r in evaluated),
        cornea_2d=error_stats(r.cornea_2d_error_px for r in evaluated),
        classical_distance=error_stats(r.classical_distance_mm for r in evaluated
                                       if r.classical_distance_mm is not None),
        histogram=error_histogram(errors, bin_width),
    )


class ExperimentPipeline:
    """Runs every configured variant over simulated subjects"""

    def __init__(self, config_manager, run_config: RunConfig = None):
        self.config = config_manager
        self.run_config = run_config or RunConfig.from_config(config_manager)
        self.simulator = EyeSimulator(config_manager)
        self.camera = self.simulator.camera
        self.rig = self.simulator.rig
        self.solver = CorneaSolver(config_manager, self.camera, self.rig)
        self.detect_config = DetectConfig.from_config(config_manager)
        self.detector = RasterDetector(config_manager, self.camera, self.rig, self.detect_config)
        self.net_config = NetTrainingConfig.from_config(config_manager)
        self.targets = protocol_targets(self.simulator.ranges.nominal_cornea_center)

    # -- per frame ---------------------------------------------------------

    def observe(self, variant: VariantSpec, frame, exact, raster_cache):
        if variant.detection_source == "oracle":
            return exact[frame.target.index]
        if variant.detection_source == "noisy-oracle":
            return frame.observation

        distractors = frame.observation.distractors
        key = (frame.target.index, tuple(tuple(d) for d in distractors))
        if key not in raster_cache:
            image = render_frame(frame.eye, self.rig, self.camera, self.detect_config,
                                 self.simulator.cap_deg, distractors)
            raster_cache[key] = self.detector.detect(image).observation
        return raster_cache[key]

    def solve(self, variant: VariantSpec, observation):
        """Cornea estimate and device-frame optical axis; raises GlintGazeError on failure"""
        estimate = self.solver.estimate(observation, variant.cornea_mode)
        if not observation.pupil_present:
            raise PupilNotFound("Frame has no pupil detection")
        pupil_3d = lift_pupil_to_3d(observation.pupil_2d, estimate.cornea_3d, self.camera,
                                    self.solver.lift_config.radius)
        return estimate, optical_axis(estimate.cornea_3d, pupil_3d).to_device(self.camera)

    def fit_mapper(self, variant: VariantSpec, calib: CalibrationSet):
        if variant.mapper == "polynomial":
            return fit_poly_mapper(calib)
        return fit_net_mapper(calib, self.net_config)

    def evaluate_frame(self, variant, frame, observation, truth_obs, mapper, mapper_error):
        record = FrameRecord(variant.name, frame.subject_id, frame.target.index, frame.frame_index,
                             frame.target.depth_m, frame.target.direction_name)
        record.lee_px = labeled_euclidean_error(truth_obs.glints, observation.glints)
        record.lee_unmatched = unmatched_labels(truth_obs.glints, observation.glints)
        record.presence_correct, record.presence_total = presence_matches(truth_obs.glints, observation.glints)

        try:
            if mapper is None:
                raise mapper_error
            estimate, axis = self.solve(variant, observation)
            gaze = map_gaze(mapper, axis)
        except GlintGazeError as e:
            record.status, record.error = "rejected", type(e).__name__
            logger.debug(f"{variant.name}: frame {frame.key} rejected ({record.error}): {e}")
            return record

        truth = truth_obs.truth
        record.gaze = gaze.direction.tolist()
        record.ae_arcmin = angular_error_arcmin(gaze.direction, self.camera.direction_to_device(frame.eye.visual_axis))
        record.cornea_3d_error_mm = float(np.linalg.norm(estimate.cornea_3d - truth.cornea_3d))
        record.cornea_2d_error_px = float(np.linalg.norm(estimate.cornea_2d - truth.cornea_2d))
        if variant.cornea_mode == "svd-lift":
            record.classical_distance_mm = 0.0
        else:
            try:
                classical = self.solver.estimate(observation, "svd-lift")
                record.classical_distance_mm = float(np.linalg.norm(estimate.cornea_3d - classical.cornea_3d))
            except GlintGazeError:
                pass
        return record

    # -- per subject -------------------------------------------------------

    def run_variant(self, variant: VariantSpec, frames, exact, raster_cache):
        calib_pairs, calib_failures = [], Counter()
        for frame in frames:
            if not frame.is_calibration:
                continue
            try:
                estimate, axis = self.solve(variant, self.observe(variant, frame, exact, raster_cache))
            except GlintGazeError as e:
                calib_failures[type(e).__name__] += 1
                logger.warning(f"{variant.name}: calibration frame {frame.key} rejected: {e}")
                continue
            target = calibration_target_axis(frame.target.position, estimate.cornea_3d)
            calib_pairs.append((axis.direction, self.camera.direction_to_device(target)))

        subject_id = frames[0].subject_id
        mapper, mapper_error = None, None
        try:
            mapper = self.fit_mapper(variant, CalibrationSet.from_pairs(calib_pairs, subject_id))
        except GlintGazeError as e:
            mapper_error = e
            logger.warning(f"{variant.name}: mapper fit failed for subject {subject_id}: {e}")

        records = [
            self.evaluate_frame(variant, frame, self.observe(variant, frame, exact, raster_cache),
                                exact[frame.target.index], mapper, mapper_error)
            for frame in frames if not frame.is_calibration
        ]
        return records, calib_failures

    def run_subject(self, subject_id):
        rc = self.run_config
        subject = self.simulator.sample_subject(subject_id, rc.seed)
        logger.info(f"Subject {subject_id}: started")
        frames, exact = self.simulator.subject_frames(subject, self.targets, rc.noise, rc.frames_per_target)
        raster_cache = {}
        results = {variant.name: self.run_variant(variant, frames, exact, raster_cache) for variant in rc.variants}
        logger.info(f"Subject {subject_id}: finished")
        return results

    def run(self) -> MetricsReport:
        rc = self.run_config
        previous_threads = torch.get_num_threads()
        if any(v.mapper == "network" for v in rc.variants):
            # single intra-op thread keeps training bit-reproducible
            torch.set_num_threads(1)

        logger.info(f"Running {len(rc.variants)} variant(s) on {rc.subjects} subjects with {rc.workers} workers")
        try:
            with ThreadPoolExecutor(max_workers=max(1, rc.workers)) as executor:
                per_subject = list(executor.map(self.run_subject, range(rc.subjects)))
        finally:
            torch.set_num_threads(previous_threads)

        variants, records = {}, {}
        for variant in rc.variants:
            rows, calib_failures = [], Counter()
            for result in per_subject:
                subject_rows, failures = result[variant.name]
                rows.extend(subject_rows)
                calib_failures.update(failures)
            rows.sort(key=lambda r: r.sort_key)
            records[variant.name] = rows
            variants[variant.name] = aggregate_variant(variant, rows, calib_failures, rc.histogram_bin_arcmin)
            m = variants[variant.name]
            logger.info(f"{variant.name}: mean AE {m.ae.mean:.2f} arcmin over {m.evaluated} frames, "
                        f"{m.rejected} rejected")

        return MetricsReport(rc.config_hash, rc.seed, rc.histogram_bin_arcmin, variants,
                             self.detect_config.to_dict(), records)


def run_pipeline(config_manager, run_config: RunConfig = None) -> MetricsReport:
    return ExperimentPipeline(config_manager, run_config).run()
