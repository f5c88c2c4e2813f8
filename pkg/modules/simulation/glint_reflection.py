# =============================================================================
# SIMULATION MODULE - Glint Reflection (Alhazen problem on the cornea)
# File: modules/simulation/glint_reflection.py
# =============================================================================

import math

import numpy as np

from ..core.errors import DegenerateGeometry
from ..geometry.primitives import ORIGIN, Sphere, angle_between, vec3

ANGLE_TOLERANCE = 1e-12
MAX_BISECTIONS = 200


def _unit(v):
    return v / math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def _mismatch(theta, center, radius, u_hat, w_hat, camera, led):
    """Incidence minus reflection angle at arc angle theta (outward normal)"""
    n = math.cos(theta) * u_hat + math.sin(theta) * w_hat
    g = center + radius * n
    return angle_between(n, camera - g) - angle_between(n, led - g), g, n


def solve_glint_reflection(led, cornea: Sphere, camera_origin=ORIGIN):
    """Point on the cornea where light from the LED reflects into the camera.

    The point lies in the plane through camera, LED and cornea center; it is
    found by bisection over the arc angle in that plane. Returns None when
    the point faces away from the camera.
    """
    led = vec3(led)
    camera = vec3(camera_origin)
    center = cornea.center
    radius = cornea.radius

    to_camera = camera - center
    to_led = led - center
    if np.linalg.norm(to_camera) <= radius or np.linalg.norm(to_led) <= radius:
        raise DegenerateGeometry("Camera and LED must lie outside the corneal sphere")

    u_hat = _unit(to_camera)
    if np.linalg.norm(led - camera) < 1e-12:
        return center + radius * u_hat

    w = to_led - np.dot(to_led, u_hat) * u_hat
    if np.linalg.norm(w) < 1e-12 * np.linalg.norm(to_led):
        if np.dot(to_led, u_hat) > 0:
            return center + radius * u_hat
        raise DegenerateGeometry("LED is behind the cornea on the camera axis")
    w_hat = _unit(w)

    lo, hi = 0.0, math.atan2(float(np.dot(to_led, w_hat)), float(np.dot(to_led, u_hat)))
    g = n = None
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f, g, n = _mismatch(mid, center, radius, u_hat, w_hat, camera, led)
        if abs(f) < ANGLE_TOLERANCE or hi - lo < 1e-16:
            break
        if f < 0.0:
            lo = mid
        else:
            hi = mid

    if np.dot(n, camera - g) <= 0.0:
        return None
    return g


def reflection_mismatch(glint, led, cornea: Sphere, camera_origin=ORIGIN):
    """|incidence - reflection| in radians at a surface point"""
    glint = vec3(glint)
    n = (glint - cornea.center) / cornea.radius
    return abs(angle_between(n, vec3(camera_origin) - glint) - angle_between(n, vec3(led) - glint))
