# =============================================================================
# DETECTION MODULE - Glint Labeling
# File: modules/detection/glint_labeler.py
# =============================================================================
"""Assign candidate blobs to LED labels.

Every injective assignment of blobs to LEDs with at least two LEDs used is
scored by the LED loss of its lifted cornea (cornea ray, then depth search)
plus a fixed penalty per LED left without a glint. Larger assignments are
tried first so smaller ones can be pruned on the penalty alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations, permutations
from typing import Dict, Optional

import numpy as np
import logging

from ..core.errors import GeometryError, InsufficientGlints, NoFeasibleZ
from ..cornea.lifting import LiftConfig, lift_cornea_to_3d
from ..cornea.ray_solver import cornea_2d_from_ray, cornea_ray_from_labeled

logger = logging.getLogger(__name__)


@dataclass
class GlintLabeling:
    assignment: Dict[int, int]  # blob index -> LED label
    score: float
    cornea_2d: Optional[np.ndarray] = None
    hypotheses: int = 0
    positions: Dict[int, np.ndarray] = field(default_factory=dict)  # LED label -> glint position


def score_assignment(assignment, positions, rig, camera, lift_config: LiftConfig, absent_led_penalty=0.05):
    """LED loss of the lifted cornea plus the absent-LED penalty; raises GeometryError when unsolvable"""
    glints = sorted((label, np.asarray(positions[blob], dtype=np.float64)) for blob, label in assignment.items())
    ray = cornea_ray_from_labeled(glints, rig, camera)
    cornea_2d = cornea_2d_from_ray(ray, camera)
    lifted = lift_cornea_to_3d(cornea_2d, glints, rig, camera, lift_config)
    return lifted.loss + absent_led_penalty * (rig.count - len(assignment)), cornea_2d


def label_glints(positions, rig, camera, lift_config: LiftConfig = None, absent_led_penalty=0.05) -> GlintLabeling:
    """Best-scoring labeling of candidate glint positions"""
    if len(positions) < 2:
        raise InsufficientGlints(f"Labeling needs two or more candidate blobs, got {len(positions)}")
    lift_config = replace(lift_config or LiftConfig(), coarse_to_fine=True)

    best = None
    tried = 0
    for k in range(min(rig.count, len(positions)), 1, -1):
        if best is not None and absent_led_penalty * (rig.count - k) >= best.score:
            break
        for leds in combinations(rig.labels, k):
            for blobs in permutations(range(len(positions)), k):
                assignment = dict(zip(blobs, leds))
                tried += 1
                try:
                    score, cornea_2d = score_assignment(assignment, positions, rig, camera, lift_config,
                                                        absent_led_penalty)
                except GeometryError:
                    continue
                if best is None or score < best.score:
                    best = GlintLabeling(assignment, float(score), cornea_2d)

    if best is None:
        raise NoFeasibleZ(f"None of {tried} glint labelings could be lifted")
    best.hypotheses = tried
    best.positions = {label: np.asarray(positions[blob], dtype=np.float64) for blob, label in best.assignment.items()}
    logger.debug(f"Labeled {len(best.assignment)} glints from {tried} hypotheses, score {best.score:.3g}")
    return best
