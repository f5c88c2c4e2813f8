# =============================================================================
# DETECTION MODULE - Raster Feature Detector
# File: modules/detection/raster_detector.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import logging

from ..core.errors import GeometryError, PupilNotFound
from ..cornea.lifting import LiftConfig
from ..geometry.camera import PinholeCamera
from ..simulation.frame_synth import FrameObservation, GlintObservation
from ..simulation.led_rig import LedRig
from .detect_config import DetectConfig
from .glint_labeler import GlintLabeling, label_glints
from .pupil_fit import fit_pupil_ellipse
from .thresholding import Blob, Ellipse, extract_blobs, histogram_knee

logger = logging.getLogger(__name__)


@dataclass
class DetectionResult:
    observation: FrameObservation
    threshold: int
    blobs: List[Blob] = field(default_factory=list)
    candidates: List[int] = field(default_factory=list)
    pupil_ellipse: Optional[Ellipse] = None
    labeling: Optional[GlintLabeling] = None
    failure: Optional[str] = None


class RasterDetector:
    """Pupil center and labeled glints from a grayscale IR frame"""

    def __init__(self, config_manager=None, camera=None, rig=None, detect_config=None, lift_config=None):
        self.config = config_manager
        if config_manager is not None:
            self.camera = camera or PinholeCamera.from_config(config_manager)
            self.rig = rig or LedRig.from_config(config_manager)
            self.detect_config = detect_config or DetectConfig.from_config(config_manager)
            self.lift_config = lift_config or LiftConfig.from_config(config_manager)
        else:
            self.camera = camera or PinholeCamera()
            self.rig = rig or LedRig.square()
            self.detect_config = detect_config or DetectConfig()
            self.lift_config = lift_config or LiftConfig()

    def candidate_blobs(self, blobs, pupil_2d):
        """Indices of blobs worth labeling, nearest the pupil first"""
        cfg = self.detect_config
        if pupil_2d is None:
            order = sorted(range(len(blobs)), key=lambda i: -blobs[i].mean_intensity)
        else:
            dist = [float(np.linalg.norm(b.centroid - pupil_2d)) for b in blobs]
            order = sorted((i for i in range(len(blobs)) if dist[i] <= cfg.glint_search_radius_px),
                           key=lambda i: dist[i])
        return order[:cfg.max_candidate_blobs]

    def detect(self, image) -> DetectionResult:
        image = np.asarray(image)
        cfg = self.detect_config
        failure = None

        pupil_2d, ellipse = None, None
        try:
            pupil_2d, ellipse = fit_pupil_ellipse(image, cfg)
        except PupilNotFound as e:
            failure = type(e).__name__
            logger.debug(f"Pupil not found: {e}")

        threshold = histogram_knee(image, cfg.p_bright, cfg.glint_min_intensity)
        blobs = extract_blobs(image > threshold, image, background=threshold,
                              min_area=cfg.min_blob_area, max_area=cfg.max_blob_area)
        candidates = self.candidate_blobs(blobs, pupil_2d)

        labeling = None
        if len(candidates) >= 2:
            try:
                labeling = label_glints([blobs[i].centroid for i in candidates], self.rig, self.camera,
                                        self.lift_config, cfg.absent_led_penalty)
            except GeometryError as e:
                failure = failure or type(e).__name__
                logger.debug(f"Glint labeling failed: {e}")
        else:
            failure = failure or "InsufficientGlints"

        positions = labeling.positions if labeling else {}
        glints = [GlintObservation(label, positions.get(label), label in positions) for label in self.rig.labels]
        assigned = set(labeling.assignment) if labeling else set()
        distractors = [blobs[i].centroid.copy() for k, i in enumerate(candidates) if k not in assigned]

        observation = FrameObservation(
            pupil_2d=pupil_2d,
            pupil_present=pupil_2d is not None,
            glints=glints,
            distractors=distractors,
        )
        return DetectionResult(observation, threshold, blobs, candidates, ellipse, labeling, failure)
