# =============================================================================
# GAZE MODULE - Calibration Set and Gaze Mapping
# File: modules/gaze/calibration.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import logging

from ..geometry.primitives import normalize
from .pupil_lifting import OpticalAxis, VisualAxis

logger = logging.getLogger(__name__)


def _unit_rows(values):
    values = np.asarray(values, dtype=np.float64).reshape(-1, 3)
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("calibration directions must be non-zero")
    return values / norms


@dataclass(eq=False)
class CalibrationSet:
    """Optical-axis samples with their visual-axis targets for one subject"""

    optical: np.ndarray
    visual: np.ndarray
    subject_id: int = 0

    def __post_init__(self):
        self.optical = _unit_rows(self.optical)
        self.visual = _unit_rows(self.visual)
        if len(self.optical) != len(self.visual):
            raise ValueError("optical and visual samples must pair up")

    def __len__(self):
        return len(self.optical)

    @classmethod
    def from_pairs(cls, pairs, subject_id=0):
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros((0, 3)), np.zeros((0, 3)), subject_id)
        return cls(np.array([o for o, _ in pairs]), np.array([v for _, v in pairs]), subject_id)

    def rotated(self, rotation):
        """Same set with every direction rotated by a scipy Rotation"""
        return CalibrationSet(rotation.apply(self.optical), rotation.apply(self.visual), self.subject_id)


def calibration_target_axis(target, cornea_3d):
    """Visual-axis training target: from the estimated cornea center to the fixation target"""
    return normalize(np.asarray(target, dtype=np.float64) - np.asarray(cornea_3d, dtype=np.float64))


def map_gaze(mapper, axis: OpticalAxis) -> VisualAxis:
    return VisualAxis(mapper.map(axis.direction), axis.anchor)
