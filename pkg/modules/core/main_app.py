# =============================================================================
# CORE MODULE - Main Application
# File: modules/core/main_app.py
# =============================================================================

from collections import Counter, defaultdict
import json
import logging
from pathlib import Path

# Initialize configuration first
from ..core.config_manager import ConfigManager
from ..core.errors import DatasetFormatError, GlintGazeError
# Initialize simulation components
from ..simulation.dataset_io import (DATASET_SCHEMA, OBSERVATION_SCHEMA, SCHEMA_VERSION, read_dataset, read_jsonl,
                                     write_dataset, write_jsonl)
from ..simulation.frame_synth import FrameObservation, NoiseSpec
from ..simulation.protocol import EyeSimulator
# Initialize solver components
from ..cornea.estimator import CorneaSolver
from ..detection.detect_config import DetectConfig
from ..detection.pgm_io import read_pgm, write_pgm
from ..detection.raster_detector import RasterDetector
from ..detection.renderer import render_frame
from ..gaze.calibration import CalibrationSet, calibration_target_axis, map_gaze
from ..gaze.mapper_io import load_mapper, save_mapper
from ..gaze.net_mapper import NetTrainingConfig, fit_net_mapper
from ..gaze.poly_mapper import fit_poly_mapper
from ..gaze.pupil_lifting import lift_pupil_to_3d, optical_axis
# Initialize evaluation components
from ..evaluation.pipeline import RunConfig, run_pipeline
from ..evaluation.report import emit_report, load_report, write_frame_records

logger = logging.getLogger(__name__)

SOLUTION_SCHEMA = "glintgaze.solutions"


class GlintGazeApp:
    """Command surface: simulate, detect, solve, calibrate, evaluate, report"""

    def __init__(self, config_file=None, seed=None, out_dir=None, fmt=None):
        self.config = ConfigManager(config_file)
        if seed is not None:
            self.config.set('run.seed', int(seed))
        if out_dir is not None:
            self.config.set('run.out_dir', str(out_dir))
        if fmt is not None:
            self.config.set('run.format', fmt)

        self.simulator = EyeSimulator(self.config)
        self.camera = self.simulator.camera
        self.rig = self.simulator.rig
        self.solver = CorneaSolver(self.config, self.camera, self.rig)
        self.detect_config = DetectConfig.from_config(self.config)

    @property
    def out_dir(self):
        return Path(self.config.get('run.out_dir', 'runs'))

    @property
    def seed(self):
        return int(self.config.get('run.seed', 0))

    def simulate(self, pgm=False):
        """Protocol dataset as JSON lines, optionally with rendered frames"""
        noise = NoiseSpec.from_config(self.config)
        dataset = self.simulator.generate_protocol_dataset(
            int(self.config.get('run.subjects', 20)), noise, int(self.config.get('run.frames_per_target', 10)))
        path = self.out_dir / "dataset.jsonl"
        write_dataset(path, dataset, self.config.config_hash())

        if pgm:
            frames_dir = self.out_dir / "frames"
            for frame in dataset.frames:
                subject, target, repeat = frame.key
                image = render_frame(frame.eye, self.rig, self.camera, self.detect_config,
                                     self.simulator.cap_deg, frame.observation.distractors)
                write_pgm(frames_dir / f"s{subject:03d}_t{target:02d}_f{repeat:02d}.pgm", image)
            logger.info(f"Rendered {len(dataset.frames)} frames to {frames_dir}")
        return path

    def detect(self, input_dir):
        """Raster detection on every PGM frame of a directory"""
        detector = RasterDetector(self.config, self.camera, self.rig, self.detect_config)
        frames = sorted(Path(input_dir).glob("*.pgm"))
        if not frames:
            raise DatasetFormatError(f"No .pgm frames in {input_dir}")

        records, failures = [], Counter()
        for frame_path in frames:
            result = detector.detect(read_pgm(frame_path))
            if result.failure:
                failures[result.failure] += 1
                logger.warning(f"{frame_path.name}: {result.failure}")
            records.append({"name": frame_path.name, "failure": result.failure,
                            "observation": result.observation.to_dict()})

        path = self.out_dir / "observations.jsonl"
        header = {"schema": OBSERVATION_SCHEMA, "schema_version": SCHEMA_VERSION,
                  "config_hash": self.config.config_hash(), "thresholds": self.detect_config.to_dict()}
        write_jsonl(path, header, records)
        logger.info(f"Detected {len(records)} frames, {sum(failures.values())} with failures")
        return path

    def _load_observations(self, path):
        """(name, observation) pairs from an observations or dataset file"""
        try:
            with open(path, 'r') as f:
                schema = json.loads(f.readline()).get("schema")
        except (OSError, json.JSONDecodeError, AttributeError) as e:
            raise DatasetFormatError(f"Cannot read {path}: {e}") from e

        if schema == DATASET_SCHEMA:
            _, frames = read_dataset(path)
            return [("s{:03d}_t{:02d}_f{:02d}".format(*f.key), f.observation) for f in frames]
        _, records = read_jsonl(path, OBSERVATION_SCHEMA)
        return [(r["name"], FrameObservation.from_dict(r["observation"])) for r in records]

    def solve_observation(self, observation, mode):
        estimate = self.solver.estimate(observation, mode)
        if not observation.pupil_present:
            return estimate, None
        pupil_3d = lift_pupil_to_3d(observation.pupil_2d, estimate.cornea_3d, self.camera,
                                    self.solver.lift_config.radius)
        return estimate, optical_axis(estimate.cornea_3d, pupil_3d).to_device(self.camera)

    def solve(self, input_path, mapper_path=None):
        """Cornea estimate, optical axis and (with a mapper) gaze per observation"""
        mode = self.config.get('run.cornea_mode', 'refine-lift')
        mapper = load_mapper(mapper_path) if mapper_path else None
        records, failures = [], Counter()
        for name, observation in self._load_observations(input_path):
            record = {"name": name, "status": "solved", "error": None}
            try:
                estimate, axis = self.solve_observation(observation, mode)
                record["cornea"] = estimate.to_dict()
                if axis is not None:
                    record["optical_axis"] = axis.direction.tolist()
                    if mapper is not None:
                        record["gaze"] = map_gaze(mapper, axis).direction.tolist()
            except GlintGazeError as e:
                failures[type(e).__name__] += 1
                record.update(status="rejected", error=type(e).__name__)
                logger.warning(f"{name}: {e}")
            records.append(record)

        path = self.out_dir / "solutions.jsonl"
        header = {"schema": SOLUTION_SCHEMA, "schema_version": SCHEMA_VERSION,
                  "config_hash": self.config.config_hash(), "cornea_mode": mode}
        write_jsonl(path, header, records)
        logger.info(f"Solved {len(records)} frames, rejections: {dict(failures)}")
        return path

    def calibrate(self, input_path):
        """One mapper file per subject from its calibration frames"""
        mode = self.config.get('run.cornea_mode', 'refine-lift')
        kind = self.config.get('mapper.kind', 'polynomial')
        _, frames = read_dataset(input_path)

        pairs = defaultdict(list)
        for frame in frames:
            if not frame.is_calibration:
                continue
            try:
                estimate, axis = self.solve_observation(frame.observation, mode)
            except GlintGazeError as e:
                logger.warning(f"Calibration frame {frame.key} rejected: {e}")
                continue
            if axis is None:
                continue
            target = calibration_target_axis(frame.target.position, estimate.cornea_3d)
            pairs[frame.subject_id].append((axis.direction, self.camera.direction_to_device(target)))

        paths = []
        for subject_id in sorted(pairs):
            calib = CalibrationSet.from_pairs(pairs[subject_id], subject_id)
            try:
                if kind == "network":
                    mapper = fit_net_mapper(calib, NetTrainingConfig.from_config(self.config))
                else:
                    mapper = fit_poly_mapper(calib)
            except GlintGazeError as e:
                logger.warning(f"Subject {subject_id}: mapper fit failed: {e}")
                continue
            path = self.out_dir / "mappers" / f"subject_{subject_id}.json"
            save_mapper(path, mapper, subject_id, self.config.config_hash())
            paths.append(path)
        return paths

    def evaluate(self, variant=None):
        """Full experiment run and its report files"""
        run_config = RunConfig.from_config(self.config, variant=variant)
        report = run_pipeline(self.config, run_config)
        out_dir = Path(run_config.out_dir)
        return write_frame_records(report, out_dir) + emit_report(report, out_dir, run_config.format)

    def report(self, input_path):
        """Re-emit the report tables from a metrics file"""
        return emit_report(load_report(input_path), self.out_dir, self.config.get('run.format', 'csv'))
