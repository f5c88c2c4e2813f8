# =============================================================================
# UTILS MODULE - Finite Difference Gradient Check
# File: modules/utils/gradcheck.py
# =============================================================================

import numpy as np
import logging

logger = logging.getLogger(__name__)


def central_difference(func, x, h=1e-4, indices=None):
    """Centered finite-difference gradient of scalar func at x.

    Only the coordinates in ``indices`` are perturbed when given; the
    others are returned as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    coords = range(x.size) if indices is None else indices
    flat = x.reshape(-1)
    for j in coords:
        step = flat.copy()
        step[j] = flat[j] + h
        f_plus = func(step.reshape(x.shape))
        step[j] = flat[j] - h
        f_minus = func(step.reshape(x.shape))
        grad.reshape(-1)[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-12):
    """||a - n|| / max(||a||, ||n||), zero when both vanish"""
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradient(func, grad_func, x, h=1e-4, indices=None):
    """Relative error between grad_func(x) and central differences of func"""
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(grad_func(x), dtype=np.float64)
    numeric = central_difference(func, x, h=h, indices=indices)
    if indices is not None:
        analytic = analytic.reshape(-1)[list(indices)]
        numeric = numeric.reshape(-1)[list(indices)]
    err = relative_error(analytic, numeric)
    logger.debug(f"Gradient check relative error: {err:.3e}")
    return err
