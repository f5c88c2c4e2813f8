# =============================================================================
# DETECTION MODULE - Pupil Ellipse Fit
# File: modules/detection/pupil_fit.py
# =============================================================================

import numpy as np
import logging
from scipy import ndimage

from ..core.errors import PupilNotFound
from .detect_config import DetectConfig
from .thresholding import Ellipse

logger = logging.getLogger(__name__)

_CONSTRAINT_INV = np.linalg.inv(np.array([[0.0, 0.0, 2.0], [0.0, -1.0, 0.0], [2.0, 0.0, 0.0]]))


def fit_conic(points):
    """Direct least-squares ellipse conic (a, b, c, d, e, f) via the 3x3 reduced eigenproblem.

    Points are centered and scaled first; the returned conic is in the
    original coordinates.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 6:
        raise PupilNotFound(f"Ellipse fit needs 6 or more boundary points, got {len(points)}")
    mean = points.mean(axis=0)
    scale = np.sqrt(np.mean(np.sum((points - mean) ** 2, axis=1)))
    if not scale > 0:
        raise PupilNotFound("Boundary points are coincident")
    x, y = ((points - mean) / scale).T

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    if np.linalg.matrix_rank(d2) < 3:
        raise PupilNotFound("Boundary points are collinear")
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        raise PupilNotFound("Boundary points are collinear")
    m = _CONSTRAINT_INV @ (s1 + s2 @ t)
    _, vecs = np.linalg.eig(m)
    vecs = np.real(vecs)
    cond = 4.0 * vecs[0] * vecs[2] - vecs[1] ** 2
    candidates = np.nonzero(cond > 0)[0]
    if len(candidates) == 0:
        raise PupilNotFound("No elliptical conic fits the boundary")
    a1 = vecs[:, candidates[0]]
    a, b, c, d, e, f = np.concatenate([a1, t @ a1])

    # undo x' = (x - mx) / s
    mx, my = mean
    s = scale
    A, B, C = a / s ** 2, b / s ** 2, c / s ** 2
    D = d / s - 2 * A * mx - B * my
    E = e / s - 2 * C * my - B * mx
    F = f + A * mx ** 2 + B * mx * my + C * my ** 2 - d * mx / s - e * my / s
    return np.array([A, B, C, D, E, F])


def conic_to_ellipse(conic) -> Ellipse:
    a, b, c, d, e, f = conic
    quad = np.array([[a, b / 2.0], [b / 2.0, c]])
    try:
        center = np.linalg.solve(2.0 * quad, [-d, -e])
    except np.linalg.LinAlgError:
        raise PupilNotFound("Conic has no center")
    k = a * center[0] ** 2 + b * center[0] * center[1] + c * center[1] ** 2 + d * center[0] + e * center[1] + f
    eigvals, eigvecs = np.linalg.eigh(quad)
    with np.errstate(invalid='ignore', divide='ignore'):
        axes = np.sqrt(-k / eigvals)
    if not np.all(np.isfinite(axes)):
        raise PupilNotFound("Conic is not a real ellipse")
    major = int(np.argmax(axes))
    direction = eigvecs[:, major]
    return Ellipse(center=center, semi_major=float(axes[major]), semi_minor=float(axes[1 - major]),
                   angle=float(np.arctan2(direction[1], direction[0])))


def fit_ellipse(points) -> Ellipse:
    return conic_to_ellipse(fit_conic(points))


def pupil_boundary(image, config: DetectConfig = None):
    """Boundary pixels (u, v) of the largest dark region, away from specular spots"""
    config = config or DetectConfig()
    image = np.asarray(image)
    dark = image <= config.pupil_max_intensity
    labels, count = ndimage.label(dark)
    if count == 0:
        raise PupilNotFound("No dark region in the frame")
    areas = ndimage.sum_labels(dark, labels, index=np.arange(1, count + 1))
    best = int(np.argmax(areas))
    if areas[best] < config.min_pupil_area:
        raise PupilNotFound(f"Largest dark region has {int(areas[best])} pixels")

    region = ndimage.binary_fill_holes(labels == best + 1)
    boundary = region & ~ndimage.binary_erosion(region)
    # glints over the pupil edge corrupt the contour
    bright = ndimage.binary_dilation(image >= config.glint_min_intensity, iterations=3)
    rows, cols = np.nonzero(boundary & ~bright)
    return np.column_stack([cols, rows]).astype(np.float64)


def fit_pupil_ellipse(image, config: DetectConfig = None):
    """Pupil center (u, v) and the fitted ellipse"""
    points = pupil_boundary(image, config)
    ellipse = fit_ellipse(points)
    logger.debug(f"Pupil ellipse at {ellipse.center} from {len(points)} boundary points")
    return ellipse.center.copy(), ellipse
