# =============================================================================
# SIMULATION MODULE - Eye Model
# File: modules/simulation/eye_model.py
# =============================================================================
"""Spherical eye model: eyeball, corneal sphere, pupil and the kappa offset.

The camera sits at the origin looking along +z and the eye looks back
toward -z, so the primary (straight ahead) optical axis is (0, 0, -1).
Kappa is a fixed rotation in the eye frame: the visual axis in primary
position is R_x(v) R_y(h) (0, 0, -1). For any other gaze the eye is turned
by the shortest arc that carries that primary visual axis onto the current
one, which keeps the optical/visual angle constant for a subject.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation
import logging

from ..core.errors import NoConvergence
from ..geometry.primitives import Sphere, Vec3, normalize, vec3
from ..utils.units import parse_length, parse_point

logger = logging.getLogger(__name__)

PRIMARY_AXIS = np.array([0.0, 0.0, -1.0])
PUPIL_MODES = ("on-sphere", "anatomical")


@dataclass(frozen=True, eq=False)
class SubjectParams:
    subject_id: int
    eyeball_center: Vec3
    kappa_deg: tuple
    cornea_radius: float = 8.0
    eyeball_to_cornea: float = 5.3
    eyeball_radius: float = 12.0
    iris_radius: float = 6.0
    pupil_radius: float = 1.25
    pupil_mode: str = "on-sphere"
    pupil_anatomical_offset: float = 4.2

    def __post_init__(self):
        object.__setattr__(self, "eyeball_center", vec3(self.eyeball_center))
        object.__setattr__(self, "kappa_deg", (float(self.kappa_deg[0]), float(self.kappa_deg[1])))
        if self.pupil_mode not in PUPIL_MODES:
            raise ValueError(f"Unknown pupil mode {self.pupil_mode!r}")

    @property
    def primary_visual_axis(self) -> Vec3:
        return kappa_rotation(self.kappa_deg).apply(PRIMARY_AXIS)


@dataclass(frozen=True, eq=False)
class SubjectRanges:
    """Anatomical ranges subjects are drawn from"""

    eyeball_center: Vec3 = field(default_factory=lambda: np.array([0.0, 0.0, 40.3]))
    eyeball_jitter: float = 2.0
    kappa_deg: tuple = (5.0, 1.5)
    kappa_jitter_deg: float = 1.0
    cornea_radius: float = 8.0
    cornea_radius_jitter: float = 0.0
    eyeball_to_cornea: float = 5.3
    eyeball_radius: float = 12.0
    iris_radius: float = 6.0
    pupil_radius: float = 1.25
    pupil_mode: str = "on-sphere"
    pupil_anatomical_offset: float = 4.2

    @classmethod
    def from_config(cls, config):
        length = lambda key, default: parse_length(config.get(key, default), key)
        return cls(
            eyeball_center=np.array(parse_point(config.get('eye.eyeball_center', [0.0, 0.0, 40.3]),
                                                'eye.eyeball_center')),
            eyeball_jitter=length('eye.eyeball_jitter', 2.0),
            kappa_deg=tuple(config.get('eye.kappa_deg', [5.0, 1.5])),
            kappa_jitter_deg=float(config.get('eye.kappa_jitter_deg', 1.0)),
            cornea_radius=length('eye.cornea_radius', 8.0),
            cornea_radius_jitter=length('eye.cornea_radius_jitter', 0.0),
            eyeball_to_cornea=length('eye.eyeball_to_cornea', 5.3),
            eyeball_radius=length('eye.eyeball_radius', 12.0),
            iris_radius=length('eye.iris_radius', 6.0),
            pupil_radius=length('eye.pupil_radius', 1.25),
            pupil_mode=config.get('eye.pupil_mode', 'on-sphere'),
            pupil_anatomical_offset=length('eye.pupil_anatomical_offset', 4.2),
        )

    @property
    def nominal_cornea_center(self) -> Vec3:
        return self.eyeball_center + self.eyeball_to_cornea * PRIMARY_AXIS

    def sample(self, subject_id, rng) -> SubjectParams:
        center = self.eyeball_center + rng.uniform(-self.eyeball_jitter, self.eyeball_jitter, size=3)
        kappa = np.asarray(self.kappa_deg, dtype=np.float64) + rng.uniform(
            -self.kappa_jitter_deg, self.kappa_jitter_deg, size=2)
        radius = self.cornea_radius + rng.uniform(-self.cornea_radius_jitter, self.cornea_radius_jitter)
        return SubjectParams(
            subject_id=subject_id,
            eyeball_center=center,
            kappa_deg=(kappa[0], kappa[1]),
            cornea_radius=radius,
            eyeball_to_cornea=self.eyeball_to_cornea,
            eyeball_radius=self.eyeball_radius,
            iris_radius=self.iris_radius,
            pupil_radius=self.pupil_radius,
            pupil_mode=self.pupil_mode,
            pupil_anatomical_offset=self.pupil_anatomical_offset,
        )


@dataclass(frozen=True, eq=False)
class EyeState:
    """Ground-truth pose of one eye for one fixation"""

    eyeball_center: Vec3
    optical_axis: Vec3
    visual_axis: Vec3
    kappa_deg: tuple
    cornea: Sphere
    pupil_center_3d: Vec3
    pupil_radius: float
    iris_radius: float
    eyeball_radius: float

    def to_dict(self):
        return {
            "eyeball_center": self.eyeball_center.tolist(),
            "optical_axis": self.optical_axis.tolist(),
            "visual_axis": self.visual_axis.tolist(),
            "kappa_deg": list(self.kappa_deg),
            "cornea_center": self.cornea.center.tolist(),
            "cornea_radius": self.cornea.radius,
            "pupil_center_3d": self.pupil_center_3d.tolist(),
            "pupil_radius": self.pupil_radius,
            "iris_radius": self.iris_radius,
            "eyeball_radius": self.eyeball_radius,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            eyeball_center=vec3(data["eyeball_center"]),
            optical_axis=vec3(data["optical_axis"]),
            visual_axis=vec3(data["visual_axis"]),
            kappa_deg=tuple(data["kappa_deg"]),
            cornea=Sphere(vec3(data["cornea_center"]), float(data["cornea_radius"])),
            pupil_center_3d=vec3(data["pupil_center_3d"]),
            pupil_radius=float(data["pupil_radius"]),
            iris_radius=float(data["iris_radius"]),
            eyeball_radius=float(data["eyeball_radius"]),
        )


def kappa_rotation(kappa_deg) -> Rotation:
    return Rotation.from_euler('yx', [kappa_deg[0], kappa_deg[1]], degrees=True)


def kappa_angle(kappa_deg) -> float:
    """Constant optical/visual angle in radians for a subject"""
    h, v = np.radians(kappa_deg[0]), np.radians(kappa_deg[1])
    return float(np.arccos(np.clip(np.cos(h) * np.cos(v), -1.0, 1.0)))


def shortest_arc(a, b) -> Rotation:
    """Minimal rotation carrying unit vector a onto unit vector b"""
    a = normalize(a)
    b = normalize(b)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.dot(a, b))
    if s < 1e-15:
        if c > 0:
            return Rotation.identity()
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return Rotation.from_rotvec(normalize(perp) * np.pi)
    return Rotation.from_rotvec(axis / s * np.arctan2(s, c))


def optical_from_visual(visual_axis, primary_visual_axis) -> Vec3:
    """Inverse kappa rotation: optical axis for a given visual axis"""
    return normalize(shortest_arc(primary_visual_axis, visual_axis).apply(PRIMARY_AXIS))


def eye_state(subject: SubjectParams, optical_axis, visual_axis) -> EyeState:
    """Assemble the eye for a given optical axis"""
    optical_axis = normalize(optical_axis)
    center = subject.eyeball_center + subject.eyeball_to_cornea * optical_axis
    cornea = Sphere(center, subject.cornea_radius)
    offset = subject.cornea_radius if subject.pupil_mode == "on-sphere" else subject.pupil_anatomical_offset
    return EyeState(
        eyeball_center=subject.eyeball_center,
        optical_axis=optical_axis,
        visual_axis=normalize(visual_axis),
        kappa_deg=subject.kappa_deg,
        cornea=cornea,
        pupil_center_3d=center + offset * optical_axis,
        pupil_radius=subject.pupil_radius,
        iris_radius=subject.iris_radius,
        eyeball_radius=subject.eyeball_radius,
    )


def eye_pose_for_target(target, subject: SubjectParams, max_iter=100, tol=1e-9) -> EyeState:
    """Pose the eye so its visual axis passes from the cornea center through the target.

    The cornea center moves with the optical axis, so the two are solved by
    fixed-point iteration.
    """
    position = vec3(getattr(target, "position", target))
    primary_visual = subject.primary_visual_axis

    optical = optical_from_visual(normalize(position - subject.eyeball_center), primary_visual)
    center = subject.eyeball_center + subject.eyeball_to_cornea * optical
    for iteration in range(1, max_iter + 1):
        visual = normalize(position - center)
        optical = optical_from_visual(visual, primary_visual)
        new_center = subject.eyeball_center + subject.eyeball_to_cornea * optical
        step = float(np.linalg.norm(new_center - center))
        center = new_center
        if step < tol:
            logger.debug(f"Eye pose converged after {iteration} iterations")
            return eye_state(subject, optical, normalize(position - center))

    raise NoConvergence(f"Eye pose did not converge in {max_iter} iterations (last step {step:.3e} mm)")
