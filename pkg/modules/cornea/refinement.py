# =============================================================================
# CORNEA MODULE - Joint Cornea 2D / Glint Refinement
# File: modules/cornea/refinement.py
# =============================================================================
"""Gradient descent on the mean squared distance from the cornea 2D point
to every LED-glint image line.

Lines are built in homogeneous form, h = (g, 1) x l, so LEDs that project
to vanishing points need no special case. Glints may move jointly with
the cornea point; each is tethered to its starting position. When a direct
cornea observation is supplied the cornea point is tethered to it as well,
so the refined point blends that observation with the line intersection.

With LEDs in the camera plane every line keeps its direction while its
glint moves, which makes the loss an exact quadratic. Descent is then
monotone for any step below 2 / (largest Hessian eigenvalue);
tune_step_size finds that bound by bisection on simulated frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
import logging

from ..core.errors import DegenerateLine, InsufficientGlints
from .ray_solver import labeled_glints, led_image_points

logger = logging.getLogger(__name__)

DEGENERATE_LINE_PX = 1e-6

# Frozen from tune_step_size on four-glint frames at tether 0.1: the bound is
# about 1.27 there and about 0.95 with two or three glints.
DEFAULT_STEP_SIZE = 0.5


@dataclass(frozen=True)
class RefinementConfig:
    steps: int = 100
    step_size: float = DEFAULT_STEP_SIZE
    glint_freedom: bool = True
    tether_weight: float = 0.1
    prior_weight: float = 0.05

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.step_size < 0:
            raise ValueError("step_size must be non-negative")
        if self.tether_weight < 0 or self.prior_weight < 0:
            raise ValueError("tether weights must be non-negative")

    @classmethod
    def from_config(cls, config):
        return cls(
            steps=int(config.get('solver.refine_steps', 100)),
            step_size=float(config.get('solver.step_size', DEFAULT_STEP_SIZE)),
            glint_freedom=bool(config.get('solver.glint_freedom', True)),
            tether_weight=float(config.get('solver.tether_weight', 0.1)),
            prior_weight=float(config.get('solver.prior_weight', 0.05)),
        )


@dataclass
class RefinementResult:
    cornea_2d: np.ndarray
    glints: np.ndarray
    trace: List[float] = field(default_factory=list)
    used: np.ndarray = None

    @property
    def monotonic(self):
        return all(b <= a + 1e-12 for a, b in zip(self.trace, self.trace[1:]))


def _line_terms(c, glints, leds):
    a, b, w = leds[:, 0], leds[:, 1], leds[:, 2]
    gx, gy = glints[:, 0], glints[:, 1]
    h0 = gy * w - b
    h1 = a - gx * w
    h2 = gx * b - gy * a
    s = np.sqrt(h0 * h0 + h1 * h1)
    num = h0 * c[0] + h1 * c[1] + h2
    return h0, h1, s, num, a, b, w


def line_distances(c, glints, leds):
    """Signed distance from c to each LED-glint line"""
    _, _, s, num, _, _, _ = _line_terms(np.asarray(c, float), np.asarray(glints, float), np.asarray(leds, float))
    return num / s


def refinement_loss(c, glints, leds, anchors, tether_weight, glint_freedom=True, prior=None, prior_weight=0.0):
    d = line_distances(c, glints, leds)
    loss = float(np.mean(d * d))
    if glint_freedom:
        loss += tether_weight * float(np.sum((np.asarray(glints) - anchors) ** 2))
    if prior is not None:
        loss += prior_weight * float(np.sum((np.asarray(c) - prior) ** 2))
    return loss


def refinement_gradient(c, glints, leds, anchors, tether_weight, glint_freedom=True, prior=None, prior_weight=0.0):
    """Analytic gradient of refinement_loss: (d/dc, d/dglints)"""
    c = np.asarray(c, dtype=np.float64)
    glints = np.asarray(glints, dtype=np.float64)
    h0, h1, s, num, a, b, w = _line_terms(c, glints, leds)
    d = num / s
    n = len(d)

    grad_c = (2.0 / n) * np.array([np.sum(d * h0 / s), np.sum(d * h1 / s)])
    if prior is not None:
        grad_c += 2.0 * prior_weight * (c - prior)
    if not glint_freedom:
        return grad_c, np.zeros_like(glints)

    dnum_dgx = -w * c[1] + b
    dnum_dgy = w * c[0] - a
    ds_dgx = -h1 * w / s
    ds_dgy = h0 * w / s
    dd_dgx = dnum_dgx / s - num * ds_dgx / (s * s)
    dd_dgy = dnum_dgy / s - num * ds_dgy / (s * s)
    grad_g = (2.0 / n) * np.stack([d * dd_dgx, d * dd_dgy], axis=1)
    grad_g += 2.0 * tether_weight * (glints - anchors)
    return grad_c, grad_g


def usable_pairs(glints, leds):
    """Mask of glints whose line to the LED image point is defined"""
    mask = np.ones(len(glints), dtype=bool)
    for i, (g, l) in enumerate(zip(glints, leds)):
        if abs(l[2]) > 1e-12:
            degenerate = np.linalg.norm(g - l[:2] / l[2]) < DEGENERATE_LINE_PX
        else:
            degenerate = np.hypot(l[0], l[1]) < 1e-12
        if degenerate:
            logger.warning(f"Excluding glint {i}: {DegenerateLine.__name__} (glint on LED image point)")
            mask[i] = False
    return mask


def refine_cornea2d_and_glints(cornea_2d, glints, led_points, config: RefinementConfig,
                               prior=None) -> RefinementResult:
    """Run exactly config.steps descent steps; returns the final state and loss trace.

    prior is an independent observation of the cornea 2D point; it is held
    with config.prior_weight. Without it the cornea point is free.
    """
    c = np.asarray(cornea_2d, dtype=np.float64).copy()
    glints = np.asarray(glints, dtype=np.float64).reshape(-1, 2)
    leds = np.asarray(led_points, dtype=np.float64).reshape(-1, 3)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(glints))):
        raise ValueError("initial cornea and glint positions must be finite")
    if prior is not None:
        prior = np.asarray(prior, dtype=np.float64)
        if not np.all(np.isfinite(prior)):
            prior = None

    used = usable_pairs(glints, leds)
    if used.sum() < 2:
        raise InsufficientGlints(f"Need two or more usable LED-glint lines, got {int(used.sum())}")

    anchors = glints[used].copy()
    g = anchors.copy()
    l_used = leds[used]
    args = (anchors, config.tether_weight, config.glint_freedom, prior, config.prior_weight)

    trace = [refinement_loss(c, g, l_used, *args)]
    for _ in range(config.steps):
        grad_c, grad_g = refinement_gradient(c, g, l_used, *args)
        c = c - config.step_size * grad_c
        if config.glint_freedom:
            g = g - config.step_size * grad_g
        trace.append(refinement_loss(c, g, l_used, *args))

    refined = glints.copy()
    refined[used] = g
    logger.debug(f"Refinement loss {trace[0]:.4e} -> {trace[-1]:.4e} in {config.steps} steps")
    return RefinementResult(c, refined, trace, used)


def tuning_problems(observations, rig, camera):
    """(start, glints, LED points) per observation, starting from its direct cornea 2D point"""
    problems = []
    for obs in observations:
        glints = labeled_glints(obs)
        if obs.cornea_2d is None or len(glints) < 2:
            continue
        labels = [label for label, _ in glints]
        problems.append((obs.cornea_2d, np.array([p for _, p in glints]), led_image_points(rig, camera, labels)))
    return problems


def tune_step_size(problems, config: RefinementConfig = None, high=4.0, iterations=30):
    """Largest step size whose loss trace stays non-increasing on every problem.

    Bisection between 0 (always monotone) and high (must diverge).
    """
    config = config or RefinementConfig()
    if not problems:
        raise ValueError("no refinement problems to tune on")

    def stable(step):
        trial = replace(config, step_size=step)
        return all(refine_cornea2d_and_glints(c, g, leds, trial).monotonic for c, g, leds in problems)

    if stable(high):
        raise ValueError(f"step size {high} is still stable; raise the upper bracket")
    low = 0.0
    for _ in range(iterations):
        mid = 0.5 * (low + high)
        if stable(mid):
            low = mid
        else:
            high = mid
    logger.info(f"Refinement step size bound {low:.4f} over {len(problems)} frames")
    return low