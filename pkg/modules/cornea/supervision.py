# =============================================================================
# CORNEA MODULE - Model-Based Cornea 2D Supervision
# File: modules/cornea/supervision.py
# =============================================================================

from collections import Counter
import logging

from ..core.errors import GlintGazeError
from .ray_solver import cornea_2d_from_ray, cornea_ray_from_glints

logger = logging.getLogger(__name__)


def supervise_cornea2d(frames, rig, camera):
    """Cornea 2D label per frame from its labeled glints and the known LEDs.

    Returns (labels keyed by frame key, failure counts by error name);
    frames that cannot be solved are skipped.
    """
    labels = {}
    failures = Counter()
    for frame in frames:
        try:
            ray = cornea_ray_from_glints(frame.observation, rig, camera)
            labels[frame.key] = cornea_2d_from_ray(ray, camera)
        except GlintGazeError as e:
            failures[type(e).__name__] += 1
            logger.warning(f"Skipping frame {frame.key} for cornea supervision: {e}")
    logger.info(f"Cornea 2D supervision: {len(labels)} labels, {sum(failures.values())} skipped")
    return labels, dict(failures)
