# =============================================================================
# DETECTION MODULE - Synthetic IR Frame Renderer
# File: modules/detection/renderer.py
# =============================================================================

import numpy as np
import logging

from ..geometry.camera import PinholeCamera, back_project_many, project
from ..simulation.eye_model import EyeState
from ..simulation.frame_synth import glint_visible
from ..simulation.glint_reflection import solve_glint_reflection
from .detect_config import DetectConfig

logger = logging.getLogger(__name__)


def pixel_grid(camera: PinholeCamera):
    """(H, W, 2) array of (u, v) pixel-center coordinates"""
    v, u = np.mgrid[0:camera.height, 0:camera.width].astype(np.float64)
    return np.stack([u, v], axis=-1)


def _disc_on_plane(rays, center, normal, radius):
    denom = rays @ normal
    safe = np.where(np.abs(denom) > 1e-12, denom, np.nan)
    t = np.dot(center, normal) / safe
    points = rays * t[..., None]
    with np.errstate(invalid='ignore'):
        inside = np.linalg.norm(points - center, axis=-1) <= radius
    return inside & (t > 0)


def _sphere_hit(rays, center, radius):
    b = rays @ center
    return (b > 0) & (b * b - (np.dot(center, center) - radius * radius) >= 0)


def render_frame(eye: EyeState, rig, camera: PinholeCamera, config: DetectConfig = None,
                 cap_deg=None, distractors=()):
    """Grayscale IR frame: face, sclera, iris and pupil discs, glints as Gaussian spots"""
    config = config or DetectConfig()
    grid = pixel_grid(camera)
    rays = back_project_many(camera, grid)

    image = np.full((camera.height, camera.width), float(config.background_level))
    image[_sphere_hit(rays, eye.eyeball_center, eye.eyeball_radius)] = config.sclera_level
    image[_disc_on_plane(rays, eye.pupil_center_3d, eye.optical_axis, eye.iris_radius)] = config.iris_level
    image[_disc_on_plane(rays, eye.pupil_center_3d, eye.optical_axis, eye.pupil_radius)] = config.pupil_level

    spots = []
    for label in rig.labels:
        g3 = solve_glint_reflection(rig.position(label), eye.cornea)
        if glint_visible(eye, g3, cap_deg):
            spots.append(project(camera, g3))
    spots.extend(np.asarray(d, dtype=np.float64) for d in distractors)

    two_sigma_sq = 2.0 * config.glint_sigma_px ** 2
    for spot in spots:
        d_sq = np.sum((grid - spot) ** 2, axis=-1)
        image = np.maximum(image, 255.0 * np.exp(-d_sq / two_sigma_sq))

    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
