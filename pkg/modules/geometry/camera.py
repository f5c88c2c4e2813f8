# =============================================================================
# GEOMETRY MODULE - Pinhole Camera
# File: modules/geometry/camera.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.errors import NonPositiveDepth
from ..utils.units import parse_length
from .primitives import Vec2, Vec3, normalize, vec2, vec3


@dataclass(frozen=True, eq=False)
class PinholeCamera:
    """Distortion-free pinhole camera at the origin looking along +z"""

    focal_px: float = 600.0
    principal_point: tuple = (320.0, 240.0)
    width: int = 640
    height: int = 480
    device_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    device_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ValueError("focal length must be positive")
        cu, cv = self.principal_point
        if not (0.0 <= cu <= self.width and 0.0 <= cv <= self.height):
            raise ValueError("principal point must lie inside the image")
        object.__setattr__(self, "principal_point", (float(cu), float(cv)))
        object.__setattr__(self, "device_rotation", np.asarray(self.device_rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "device_translation", vec3(self.device_translation))

    @classmethod
    def from_config(cls, config):
        width = int(config.get('camera.image_width', 640))
        height = int(config.get('camera.image_height', 480))
        principal = config.get('camera.principal_point', (width / 2.0, height / 2.0))
        translation = [parse_length(v, 'camera.device_translation')
                       for v in config.get('camera.device_translation', [0.0, 0.0, 0.0])]
        return cls(
            focal_px=float(config.get('camera.focal_px', 600.0)),
            principal_point=tuple(principal),
            width=width,
            height=height,
            device_rotation=np.asarray(config.get('camera.device_rotation', np.eye(3).tolist()), dtype=np.float64),
            device_translation=np.asarray(translation),
        )

    @property
    def intrinsics(self):
        cu, cv = self.principal_point
        return np.array([[self.focal_px, 0.0, cu], [0.0, self.focal_px, cv], [0.0, 0.0, 1.0]])

    def to_device(self, point: Vec3) -> Vec3:
        return self.device_rotation @ vec3(point) + self.device_translation

    def direction_to_device(self, direction: Vec3) -> Vec3:
        return self.device_rotation @ vec3(direction)


def project(camera: PinholeCamera, p) -> Vec2:
    """Pinhole projection of a camera-frame point to pixels"""
    p = vec3(p)
    if not p[2] > 0:
        raise NonPositiveDepth(f"Point {p} is not in front of the camera")
    cu, cv = camera.principal_point
    return vec2(camera.focal_px * p[0] / p[2] + cu, camera.focal_px * p[1] / p[2] + cv)


def back_project(camera: PinholeCamera, q) -> Vec3:
    """Unit viewing direction through pixel q"""
    q = vec2(q)
    cu, cv = camera.principal_point
    return normalize(np.array([(q[0] - cu) / camera.focal_px, (q[1] - cv) / camera.focal_px, 1.0]))


def back_project_many(camera: PinholeCamera, q) -> np.ndarray:
    """Vectorized back_project over an (..., 2) pixel array"""
    q = np.asarray(q, dtype=np.float64)
    cu, cv = camera.principal_point
    rays = np.stack([(q[..., 0] - cu) / camera.focal_px,
                     (q[..., 1] - cv) / camera.focal_px,
                     np.ones(q.shape[:-1])], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def homogeneous_image_point(camera: PinholeCamera, p) -> np.ndarray:
    """K·p as a homogeneous pixel triple; points with z <= 0 give vanishing points"""
    return camera.intrinsics @ vec3(p)
