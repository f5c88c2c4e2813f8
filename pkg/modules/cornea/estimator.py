# =============================================================================
# CORNEA MODULE - Cornea Estimator
# File: modules/cornea/estimator.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import logging

from ..core.errors import InsufficientConstraints, InsufficientGlints
from ..geometry.camera import PinholeCamera, back_project
from ..geometry.primitives import ORIGIN, Ray3
from ..simulation.led_rig import LedRig
from .lifting import LiftConfig, lift_cornea_to_3d
from .ray_solver import cornea_2d_from_ray, cornea_ray_from_labeled, labeled_glints, led_image_points
from .refinement import RefinementConfig, refine_cornea2d_and_glints

logger = logging.getLogger(__name__)

CORNEA_MODES = ("svd-lift", "refine-lift", "raw-lift")


@dataclass
class CorneaEstimate:
    cornea_ray: Ray3
    cornea_2d: np.ndarray
    cornea_3d: np.ndarray
    led_loss: float
    mode: str
    refinement_trace: List[float] = field(default_factory=list)
    glints: Optional[list] = None

    def to_dict(self):
        return {
            "mode": self.mode,
            "cornea_ray": self.cornea_ray.direction.tolist(),
            "cornea_2d": self.cornea_2d.tolist(),
            "cornea_3d": self.cornea_3d.tolist(),
            "led_loss": self.led_loss,
        }


class CorneaSolver:
    """Cornea ray, optional 2D refinement and 3D lifting for one frame"""

    def __init__(self, config_manager, camera=None, rig=None):
        self.config = config_manager
        self.camera = camera or PinholeCamera.from_config(config_manager)
        self.rig = rig or LedRig.from_config(config_manager)
        self.refinement = RefinementConfig.from_config(config_manager)
        self.lift_config = LiftConfig.from_config(config_manager)

    def estimate(self, observation, mode="svd-lift") -> CorneaEstimate:
        if mode not in CORNEA_MODES:
            raise ValueError(f"Unknown cornea mode {mode!r}")
        glints = labeled_glints(observation)
        if len(glints) < 2:
            raise InsufficientGlints(f"Need two or more labeled glints, got {len(glints)}")

        trace = []
        if mode == "raw-lift":
            if observation.cornea_2d is None:
                raise InsufficientConstraints("Frame carries no direct cornea 2D observation")
            cornea_2d = np.asarray(observation.cornea_2d, dtype=np.float64)
        else:
            ray = cornea_ray_from_labeled(glints, self.rig, self.camera)
            cornea_2d = cornea_2d_from_ray(ray, self.camera)

        if mode == "refine-lift":
            # start from the SVD point; a direct cornea observation, when present, anchors it
            labels = [label for label, _ in glints]
            result = refine_cornea2d_and_glints(
                cornea_2d,
                np.array([p for _, p in glints]),
                led_image_points(self.rig, self.camera, labels),
                self.refinement,
                prior=observation.cornea_2d,
            )
            cornea_2d = result.cornea_2d
            glints = [(label, result.glints[i]) for i, label in enumerate(labels) if result.used[i]]
            trace = result.trace

        lifted = lift_cornea_to_3d(cornea_2d, glints, self.rig, self.camera, self.lift_config)
        return CorneaEstimate(
            cornea_ray=Ray3(ORIGIN, back_project(self.camera, cornea_2d)),
            cornea_2d=np.asarray(cornea_2d, dtype=np.float64),
            cornea_3d=lifted.cornea_3d,
            led_loss=lifted.loss,
            mode=mode,
            refinement_trace=trace,
            glints=glints,
        )
