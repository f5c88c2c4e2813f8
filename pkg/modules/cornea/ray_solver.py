# =============================================================================
# CORNEA MODULE - Cornea Ray from Glint/LED Planes
# File: modules/cornea/ray_solver.py
# =============================================================================

import numpy as np

from ..core.errors import DegenerateGeometry, InsufficientGlints
from ..geometry.camera import PinholeCamera, back_project, homogeneous_image_point, project
from ..geometry.null_ray import solve_null_ray
from ..geometry.primitives import ORIGIN, Ray3, normalize


def labeled_glints(observation):
    """(label, position) for every present glint, in label order"""
    return [(g.label, g.position) for g in sorted(observation.present_glints(), key=lambda g: g.label)]


def glint_plane_normals(glints, rig, camera: PinholeCamera):
    """Normal of the plane through the camera center, glint ray and LED, per glint"""
    normals = []
    for label, position in glints:
        led = rig.position(label)
        if np.linalg.norm(led) == 0.0:
            raise DegenerateGeometry(f"LED {label} sits at the camera center")
        normals.append(np.cross(back_project(camera, position), normalize(led)))
    return np.array(normals).reshape(-1, 3)


def cornea_ray_from_labeled(glints, rig, camera: PinholeCamera) -> Ray3:
    if len(glints) < 2:
        raise InsufficientGlints(f"Need two or more labeled glints, got {len(glints)}")
    return Ray3(ORIGIN, solve_null_ray(glint_plane_normals(glints, rig, camera)))


def cornea_ray_from_glints(observation, rig, camera: PinholeCamera) -> Ray3:
    """Ray from the camera center on which the cornea center lies"""
    return cornea_ray_from_labeled(labeled_glints(observation), rig, camera)


def cornea_2d_from_ray(ray: Ray3, camera: PinholeCamera):
    return project(camera, ray.direction)


def led_image_points(rig, camera: PinholeCamera, labels=None):
    """Unit-norm homogeneous image points of the LEDs.

    LEDs at or behind the camera plane map to vanishing points (w <= 0);
    the LED-glint image line is still well defined through them.
    """
    labels = rig.labels if labels is None else labels
    points = np.array([homogeneous_image_point(camera, rig.position(label)) for label in labels])
    return points / np.linalg.norm(points, axis=1, keepdims=True)
