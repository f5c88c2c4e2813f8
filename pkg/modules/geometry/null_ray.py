# =============================================================================
# GEOMETRY MODULE - Null Ray Solver
# File: modules/geometry/null_ray.py
# =============================================================================

import numpy as np
import logging

from ..core.errors import DegenerateSystem, InsufficientConstraints
from .primitives import Vec3

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-9


def solve_null_ray(plane_normals, min_count=2) -> Vec3:
    """Unit direction v minimizing sum (n_i·v)^2, oriented into the scene (v.z > 0)"""
    normals = np.asarray(plane_normals, dtype=np.float64).reshape(-1, 3)
    if normals.shape[0] < min_count:
        raise InsufficientConstraints(f"Need at least {min_count} plane normals, got {normals.shape[0]}")

    # pad to 3 rows so the third singular value exists
    if normals.shape[0] < 3:
        normals = np.vstack([normals, np.zeros((3 - normals.shape[0], 3))])

    _, singular, vt = np.linalg.svd(normals)
    scale = singular[0]
    if scale == 0.0 or (singular[1] - singular[2]) <= DEGENERACY_TOLERANCE * scale:
        raise DegenerateSystem(f"Null direction is not unique (singular values {singular})")

    direction = vt[-1]
    if direction[2] < 0.0:
        direction = -direction
    logger.debug(f"Null ray {direction} with residual singular value {singular[2]:.3e}")
    return direction / np.linalg.norm(direction)
