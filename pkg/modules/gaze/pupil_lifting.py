# =============================================================================
# GAZE MODULE - Pupil Lifting and Optical Axis
# File: modules/gaze/pupil_lifting.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.errors import CoincidentPoints
from ..geometry.camera import PinholeCamera, back_project
from ..geometry.primitives import ORIGIN, Ray3, Sphere, normalize, vec3
from ..geometry.reflection import ray_sphere_near_intersection


@dataclass(frozen=True, eq=False)
class GazeAxis:
    """Unit direction anchored at the cornea center"""

    direction: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "direction", normalize(self.direction))
        object.__setattr__(self, "anchor", vec3(self.anchor))

    def to_device(self, camera: PinholeCamera):
        return type(self)(camera.direction_to_device(self.direction), camera.to_device(self.anchor))


class OpticalAxis(GazeAxis):
    pass


class VisualAxis(GazeAxis):
    pass


def lift_pupil_to_3d(pupil_2d, cornea_3d, camera: PinholeCamera, radius=8.0):
    """Near intersection of the pupil viewing ray with the corneal ball"""
    ray = Ray3(ORIGIN, back_project(camera, pupil_2d))
    return ray_sphere_near_intersection(ray, Sphere(vec3(cornea_3d), radius))


def optical_axis(cornea_3d, pupil_3d) -> OpticalAxis:
    """Cornea center through the pupil center, pointing out of the eye"""
    cornea_3d, pupil_3d = vec3(cornea_3d), vec3(pupil_3d)
    if np.linalg.norm(pupil_3d - cornea_3d) < 1e-12:
        raise CoincidentPoints("Pupil center coincides with the cornea center")
    return OpticalAxis(pupil_3d - cornea_3d, cornea_3d)
