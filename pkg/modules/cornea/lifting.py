# =============================================================================
# CORNEA MODULE - Lifting Cornea 2D to 3D
# File: modules/cornea/lifting.py
# =============================================================================
"""Discretized line search for the cornea depth along the cornea 2D ray.

At each candidate depth z the corneal sphere (radius r) is placed on the
ray, every valid glint ray is intersected with it, reflected about the
surface normal, and the distance of the reflected line to its LED is
measured. The LED loss is half the sum of squared distances; depths where
any glint ray misses the sphere are infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import logging

from ..core.errors import InsufficientGlints, NoFeasibleZ
from ..geometry.camera import PinholeCamera, back_project, back_project_many
from ..utils.units import parse_length

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiftConfig:
    radius: float = 8.0
    z_min: float = 10.0
    z_max: float = 50.0
    z_step: float = 0.001
    coarse_to_fine: bool = False
    coarse_points: int = 400
    half_line: bool = False

    def __post_init__(self):
        if not (self.radius > 0 and self.z_step > 0 and self.z_max > self.z_min):
            raise ValueError("invalid lifting grid")

    @classmethod
    def from_config(cls, config):
        length = lambda key, default: parse_length(config.get(key, default), key)
        return cls(
            radius=length('eye.cornea_radius', 8.0),
            z_min=length('solver.z_min', 10.0),
            z_max=length('solver.z_max', 50.0),
            z_step=length('solver.z_step', 0.001),
            coarse_to_fine=bool(config.get('solver.coarse_to_fine', False)),
            coarse_points=int(config.get('solver.coarse_points', 400)),
            half_line=bool(config.get('solver.half_line', False)),
        )

    @property
    def grid_size(self):
        return int(round((self.z_max - self.z_min) / self.z_step)) + 1

    def z_values(self, indices=None):
        if indices is None:
            indices = np.arange(self.grid_size)
        return self.z_min + self.z_step * np.asarray(indices, dtype=np.float64)


@dataclass
class LiftResult:
    cornea_3d: np.ndarray
    z: float
    loss: float
    grid_index: int


def led_loss_on_grid(cornea_dir, glint_dirs, leds, z, radius, half_line=False):
    """LED loss for each candidate depth; +inf where a glint ray misses the sphere"""
    z = np.asarray(z, dtype=np.float64)
    centers = (z / cornea_dir[2])[:, None] * cornea_dir[None, :]
    c_sq = np.einsum('mi,mi->m', centers, centers)

    b = centers @ glint_dirs.T
    disc = b * b - (c_sq[:, None] - radius * radius)
    feasible = disc >= 0.0
    t = b - np.sqrt(np.where(feasible, disc, 0.0))
    feasible &= t > 0.0

    g3 = t[:, :, None] * glint_dirs[None, :, :]
    normals = (centers[:, None, :] - g3) / radius
    n_dot_g = np.einsum('mki,ki->mk', normals, glint_dirs)
    reflected = 2.0 * n_dot_g[:, :, None] * normals - glint_dirs[None, :, :]
    reflected /= np.linalg.norm(reflected, axis=2, keepdims=True)

    diff = g3 - leds[None, :, :]
    along = np.einsum('mki,mki->mk', diff, reflected)
    perp = diff - along[:, :, None] * reflected
    dist_sq = np.einsum('mki,mki->mk', perp, perp)
    if half_line:
        # the outgoing reflected ray runs along -r
        dist_sq = np.where(along < 0.0, np.einsum('mki,mki->mk', diff, diff), dist_sq)

    loss = 0.5 * np.sum(dist_sq, axis=1)
    loss[~np.all(feasible, axis=1)] = np.inf
    return loss


def lift_cornea_to_3d(cornea_2d, glints, rig, camera: PinholeCamera, config: LiftConfig = None) -> LiftResult:
    """Depth along back_project(cornea_2d) minimizing the LED loss; ties go to the smaller z"""
    config = config or LiftConfig()
    if len(glints) < 1:
        raise InsufficientGlints("Lifting needs at least one valid glint")

    cornea_dir = back_project(camera, cornea_2d)
    glint_dirs = back_project_many(camera, np.array([p for _, p in glints]))
    leds = np.array([rig.position(label) for label, _ in glints])

    def evaluate(indices):
        return led_loss_on_grid(cornea_dir, glint_dirs, leds, config.z_values(indices), config.radius,
                                config.half_line)

    n = config.grid_size
    if config.coarse_to_fine and config.coarse_points < n:
        stride = int(np.ceil(n / config.coarse_points))
        coarse = np.unique(np.append(np.arange(0, n, stride), n - 1))
        coarse_loss = evaluate(coarse)
        if np.isfinite(coarse_loss).any():
            k = int(coarse[np.argmin(coarse_loss)])
            indices = np.arange(max(0, k - stride), min(n, k + stride + 1))
        else:
            indices = np.arange(n)
    else:
        indices = np.arange(n)

    losses = evaluate(indices)
    if not np.isfinite(losses).any():
        raise NoFeasibleZ("Every glint ray misses the corneal sphere along the cornea ray")

    best = int(np.argmin(losses))
    z = float(config.z_values(indices[best]))
    return LiftResult(
        cornea_3d=cornea_dir * (z / cornea_dir[2]),
        z=z,
        loss=float(losses[best]),
        grid_index=int(indices[best]),
    )


def lift_losses(cornea_2d, glints, rig, camera: PinholeCamera, config: LiftConfig = None):
    """Loss at every grid depth, for brute-force checks"""
    config = config or LiftConfig()
    cornea_dir = back_project(camera, cornea_2d)
    glint_dirs = back_project_many(camera, np.array([p for _, p in glints]))
    leds = np.array([rig.position(label) for label, _ in glints])
    return config.z_values(), led_loss_on_grid(cornea_dir, glint_dirs, leds, config.z_values(), config.radius,
                                               config.half_line)
