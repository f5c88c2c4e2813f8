# =============================================================================
# SIMULATION MODULE - Data Collection Protocol
# File: modules/simulation/protocol.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
import logging

from ..geometry.camera import PinholeCamera
from ..geometry.primitives import Vec3, vec3
from ..utils.seeds import frame_rng, subject_rng
from .eye_model import EyeState, SubjectParams, SubjectRanges, eye_pose_for_target
from .frame_synth import FrameObservation, NoiseSpec, apply_noise, forward_observation
from .led_rig import LedRig

logger = logging.getLogger(__name__)

DEPTHS_M = (0.33, 0.5, 1.0, 1.5, 2.0, 3.0)
CALIBRATION_DEPTH_M = 0.5
GRID_ROWS = ("Top", "Center", "Bottom")
GRID_COLS = ("Left", "Middle", "Right")

# two grid extents (horizontal, vertical half-angles in degrees) alternate
# across planes; the narrow grid is offset 2 degrees vertically so the two share no
# direction, giving 18 distinct nominal directions
WIDE_GRID_DEG = (15.0, 10.0)
NARROW_GRID_DEG = (10.0, 7.0)
NARROW_GRID_CENTER_DEG = (0.0, 2.0)
WIDE_GRID_DEPTHS_M = (0.5, 1.5, 3.0)


@dataclass(frozen=True, eq=False)
class GazeTarget:
    index: int
    position: Vec3
    depth_m: float
    grid_index: tuple

    @property
    def direction_index(self):
        return 3 * self.grid_index[0] + self.grid_index[1]

    @property
    def direction_name(self):
        return f"{GRID_ROWS[self.grid_index[0]]} {GRID_COLS[self.grid_index[1]]}"

    @property
    def is_calibration(self):
        return self.depth_m == CALIBRATION_DEPTH_M

    def to_dict(self):
        return {"index": self.index, "position": self.position.tolist(), "depth_m": self.depth_m,
                "grid_index": list(self.grid_index)}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["index"]), vec3(data["position"]), float(data["depth_m"]),
                   tuple(data["grid_index"]))


@dataclass(eq=False)
class DatasetFrame:
    subject_id: int
    target: GazeTarget
    frame_index: int
    eye: EyeState
    observation: FrameObservation

    @property
    def is_calibration(self):
        return self.target.is_calibration

    @property
    def key(self):
        return (self.subject_id, self.target.index, self.frame_index)

    def to_dict(self):
        return {
            "subject": self.subject_id,
            "target": self.target.to_dict(),
            "frame": self.frame_index,
            "split": "calibration" if self.is_calibration else "evaluation",
            "eye": self.eye.to_dict(),
            "observation": self.observation.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            subject_id=int(data["subject"]),
            target=GazeTarget.from_dict(data["target"]),
            frame_index=int(data["frame"]),
            eye=EyeState.from_dict(data["eye"]),
            observation=FrameObservation.from_dict(data["observation"]),
        )


@dataclass(eq=False)
class ProtocolDataset:
    subjects: List[SubjectParams]
    targets: List[GazeTarget]
    frames: List[DatasetFrame]

    def frames_for(self, subject_id):
        return [f for f in self.frames if f.subject_id == subject_id]


def protocol_targets(anchor) -> List[GazeTarget]:
    """54 targets: a 3x3 grid on each of six depth planes in front of the eye"""
    anchor = vec3(anchor)
    targets = []
    for depth in DEPTHS_M:
        wide = depth in WIDE_GRID_DEPTHS_M
        half_h, half_v = WIDE_GRID_DEG if wide else NARROW_GRID_DEG
        center_h, center_v = (0.0, 0.0) if wide else NARROW_GRID_CENTER_DEG
        distance = depth * 1000.0
        for row in range(3):
            for col in range(3):
                offset = np.array([
                    distance * np.tan(np.radians(center_h + half_h * (col - 1))),
                    distance * np.tan(np.radians(center_v + half_v * (row - 1))),
                    -distance,
                ])
                targets.append(GazeTarget(len(targets), anchor + offset, depth, (row, col)))
    return targets


class EyeSimulator:
    """Forward model of the eye, LED rig and camera; the ground-truth oracle"""

    def __init__(self, config_manager):
        self.config = config_manager
        self.camera = PinholeCamera.from_config(config_manager)
        self.rig = LedRig.from_config(config_manager)
        self.ranges = SubjectRanges.from_config(config_manager)
        self.cap_deg = config_manager.get('eye.cornea_cap_deg')
        self.max_iter = int(config_manager.get('solver.fixed_point_max_iter', 100))
        self.tol = float(config_manager.get('solver.fixed_point_tol', 1e-9))

    def sample_subject(self, subject_id, seed):
        return self.ranges.sample(subject_id, subject_rng(seed, subject_id))

    def pose(self, target, subject):
        return eye_pose_for_target(target, subject, self.max_iter, self.tol)

    def exact_frame(self, eye):
        return forward_observation(eye, self.rig, self.camera, self.cap_deg)

    def subject_frames(self, subject, targets, noise: NoiseSpec, frames_per_target=1):
        """Noisy frames for one subject, plus the exact observation of each target"""
        frames, exact = [], {}
        for target in targets:
            eye = self.pose(target, subject)
            exact[target.index] = self.exact_frame(eye)
            for repeat in range(frames_per_target):
                frame_number = target.index * frames_per_target + repeat
                rng = frame_rng(noise.seed, subject.subject_id, frame_number)
                frames.append(DatasetFrame(subject.subject_id, target, repeat, eye,
                                           apply_noise(exact[target.index], noise, rng)))
        return frames, exact

    def generate_protocol_dataset(self, n_subjects, noise: NoiseSpec, frames_per_target=1):
        """Frames for every subject, target and repeat; a pure function of config and seed"""
        if n_subjects < 1:
            raise ValueError("n_subjects must be at least 1")
        targets = protocol_targets(self.ranges.nominal_cornea_center)
        subjects, frames = [], []
        for subject_id in range(n_subjects):
            subject = self.sample_subject(subject_id, noise.seed)
            subjects.append(subject)
            logger.info(f"Simulating subject {subject_id} (kappa {subject.kappa_deg[0]:.2f}, "
                        f"{subject.kappa_deg[1]:.2f} deg)")
            frames.extend(self.subject_frames(subject, targets, noise, frames_per_target)[0])
        logger.info(f"Generated {len(frames)} frames for {n_subjects} subjects")
        return ProtocolDataset(subjects, targets, frames)
