# =============================================================================
# SIMULATION MODULE - Frame Synthesis
# File: modules/simulation/frame_synth.py
# =============================================================================

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import logging

from ..geometry.camera import PinholeCamera, project
from ..geometry.primitives import ORIGIN, angle_between, vec2, vec3
from .eye_model import EyeState
from .glint_reflection import solve_glint_reflection
from .led_rig import LedRig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSpec:
    keypoint_sigma: float = 0.0
    glint_dropout_prob: float = 0.0
    distractor_count_mean: float = 0.0
    cornea_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.keypoint_sigma < 0 or self.cornea_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.glint_dropout_prob <= 1.0:
            raise ValueError("glint_dropout_prob must lie in [0, 1]")
        if self.distractor_count_mean < 0:
            raise ValueError("distractor_count_mean must be non-negative")

    @classmethod
    def from_config(cls, config, seed=None):
        return cls(
            keypoint_sigma=float(config.get('noise.keypoint_sigma', 0.0)),
            glint_dropout_prob=float(config.get('noise.glint_dropout_prob', 0.0)),
            distractor_count_mean=float(config.get('noise.distractor_count_mean', 0.0)),
            cornea_sigma=float(config.get('noise.cornea_sigma', 0.0)),
            seed=int(config.get('run.seed', 0) if seed is None else seed),
        )

    @property
    def is_zero(self):
        return (self.keypoint_sigma == 0.0 and self.glint_dropout_prob == 0.0
                and self.distractor_count_mean == 0.0 and self.cornea_sigma == 0.0)


@dataclass
class GlintObservation:
    label: int
    position: Optional[np.ndarray] = None
    present: bool = False

    def __post_init__(self):
        if self.position is None:
            self.present = False
        else:
            self.position = vec2(self.position)
        if not self.present:
            self.position = None

    def to_dict(self):
        return {"label": self.label, "present": self.present,
                "position": None if self.position is None else self.position.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["label"]), data.get("position"), bool(data.get("present", False)))


@dataclass
class FrameTruth:
    cornea_2d: np.ndarray
    cornea_3d: np.ndarray
    pupil_2d: np.ndarray
    pupil_3d: np.ndarray
    optical_axis: np.ndarray
    visual_axis: np.ndarray
    glints: List[GlintObservation]
    glints_3d: List[Optional[np.ndarray]]
    iris_center_2d: np.ndarray
    iris_radius_px: float

    def glint(self, label):
        return self.glints[label - 1]

    def to_dict(self):
        return {
            "cornea_2d": self.cornea_2d.tolist(),
            "cornea_3d": self.cornea_3d.tolist(),
            "pupil_2d": self.pupil_2d.tolist(),
            "pupil_3d": self.pupil_3d.tolist(),
            "optical_axis": self.optical_axis.tolist(),
            "visual_axis": self.visual_axis.tolist(),
            "glints": [g.to_dict() for g in self.glints],
            "glints_3d": [None if g is None else g.tolist() for g in self.glints_3d],
            "iris_center_2d": self.iris_center_2d.tolist(),
            "iris_radius_px": self.iris_radius_px,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            cornea_2d=vec2(data["cornea_2d"]),
            cornea_3d=vec3(data["cornea_3d"]),
            pupil_2d=vec2(data["pupil_2d"]),
            pupil_3d=vec3(data["pupil_3d"]),
            optical_axis=vec3(data["optical_axis"]),
            visual_axis=vec3(data["visual_axis"]),
            glints=[GlintObservation.from_dict(g) for g in data["glints"]],
            glints_3d=[None if g is None else vec3(g) for g in data["glints_3d"]],
            iris_center_2d=vec2(data["iris_center_2d"]),
            iris_radius_px=float(data["iris_radius_px"]),
        )


@dataclass
class FrameObservation:
    """Per-frame 2D measurements; glints carry fixed LED labels 1..n"""

    pupil_2d: Optional[np.ndarray]
    pupil_present: bool
    glints: List[GlintObservation]
    distractors: List[np.ndarray] = field(default_factory=list)
    cornea_2d: Optional[np.ndarray] = None
    truth: Optional[FrameTruth] = None

    def __post_init__(self):
        if self.pupil_2d is None:
            self.pupil_present = False
        elif not self.pupil_present:
            self.pupil_2d = None
        else:
            self.pupil_2d = vec2(self.pupil_2d)

    def glint(self, label):
        for g in self.glints:
            if g.label == label:
                return g
        return None

    def present_glints(self):
        return [g for g in self.glints if g.present]

    def to_dict(self):
        return {
            "pupil_2d": None if self.pupil_2d is None else self.pupil_2d.tolist(),
            "pupil_present": self.pupil_present,
            "glints": [g.to_dict() for g in self.glints],
            "distractors": [d.tolist() for d in self.distractors],
            "cornea_2d": None if self.cornea_2d is None else self.cornea_2d.tolist(),
            "truth": None if self.truth is None else self.truth.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        truth = data.get("truth")
        return cls(
            pupil_2d=data.get("pupil_2d"),
            pupil_present=bool(data.get("pupil_present", False)),
            glints=[GlintObservation.from_dict(g) for g in data.get("glints", [])],
            distractors=[vec2(d) for d in data.get("distractors", [])],
            cornea_2d=None if data.get("cornea_2d") is None else vec2(data["cornea_2d"]),
            truth=None if truth is None else FrameTruth.from_dict(truth),
        )


def glint_visible(eye: EyeState, glint_3d, cap_deg=None):
    """Glints outside the corneal cap do not appear"""
    if glint_3d is None:
        return False
    if cap_deg is None:
        return True
    outward = (glint_3d - eye.cornea.center) / eye.cornea.radius
    return np.degrees(angle_between(outward, eye.optical_axis)) <= cap_deg


def forward_observation(eye: EyeState, rig: LedRig, camera: PinholeCamera, cap_deg=None) -> FrameObservation:
    """Exact, noise-free observation of an eye state"""
    glints, glints_3d = [], []
    for label in rig.labels:
        g3 = solve_glint_reflection(rig.position(label), eye.cornea, ORIGIN)
        if not glint_visible(eye, g3, cap_deg):
            g3 = None
        glints_3d.append(g3)
        glints.append(GlintObservation(label, None if g3 is None else project(camera, g3), g3 is not None))

    pupil_2d = project(camera, eye.pupil_center_3d)
    truth = FrameTruth(
        cornea_2d=project(camera, eye.cornea.center),
        cornea_3d=eye.cornea.center.copy(),
        pupil_2d=pupil_2d,
        pupil_3d=eye.pupil_center_3d.copy(),
        optical_axis=eye.optical_axis.copy(),
        visual_axis=eye.visual_axis.copy(),
        glints=copy.deepcopy(glints),
        glints_3d=glints_3d,
        iris_center_2d=pupil_2d.copy(),
        iris_radius_px=camera.focal_px * eye.iris_radius / eye.pupil_center_3d[2],
    )
    return FrameObservation(
        pupil_2d=pupil_2d.copy(),
        pupil_present=True,
        glints=glints,
        cornea_2d=truth.cornea_2d.copy(),
        truth=truth,
    )


def apply_noise(observation: FrameObservation, noise: NoiseSpec, rng) -> FrameObservation:
    """Corrupt an exact observation.

    Draws happen in a fixed order whatever the presence flags, so the same
    generator state gives the same standard-normal draws for any sigma.
    """
    truth = observation.truth
    pupil_noise = rng.standard_normal(2)
    glint_noise = rng.standard_normal((len(observation.glints), 2))
    dropout = rng.random(len(observation.glints))
    cornea_noise = rng.standard_normal(2)
    n_distractors = int(rng.poisson(noise.distractor_count_mean)) if noise.distractor_count_mean > 0 else 0
    radii = np.sqrt(rng.random(n_distractors))
    angles = 2.0 * np.pi * rng.random(n_distractors)

    glints = []
    for i, g in enumerate(observation.glints):
        if not g.present or dropout[i] < noise.glint_dropout_prob:
            glints.append(GlintObservation(g.label))
        else:
            glints.append(GlintObservation(g.label, g.position + noise.keypoint_sigma * glint_noise[i], True))

    pupil_2d = None
    if observation.pupil_present:
        pupil_2d = observation.pupil_2d + noise.keypoint_sigma * pupil_noise

    distractors = []
    if truth is not None:
        for rho, phi in zip(radii, angles):
            offset = truth.iris_radius_px * rho * np.array([np.cos(phi), np.sin(phi)])
            distractors.append(truth.iris_center_2d + offset)

    cornea_2d = None
    if observation.cornea_2d is not None:
        cornea_2d = observation.cornea_2d + noise.cornea_sigma * cornea_noise

    return FrameObservation(
        pupil_2d=pupil_2d,
        pupil_present=pupil_2d is not None,
        glints=glints,
        distractors=distractors,
        cornea_2d=cornea_2d,
        truth=truth,
    )


def synthesize_frame(eye: EyeState, rig: LedRig, camera: PinholeCamera, noise: NoiseSpec,
                     rng=None, cap_deg=None) -> FrameObservation:
    """Exact observation of the eye, then noise, dropout and distractors"""
    exact = forward_observation(eye, rig, camera, cap_deg)
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    return apply_noise(exact, noise, rng)
