# =============================================================================
# GEOMETRY MODULE - Sphere Intersection and Specular Reflection
# File: modules/geometry/reflection.py
# =============================================================================

import math

import numpy as np

from ..core.errors import BehindCamera, NoIntersection, OffSurface
from .primitives import Ray3, Sphere, Vec3, vec3

SURFACE_TOLERANCE = 1e-6


def ray_sphere_near_intersection(ray: Ray3, sphere: Sphere) -> Vec3:
    """First visible hit of the ray on the sphere (smallest positive root)"""
    offset = sphere.center - ray.origin
    b = float(np.dot(ray.direction, offset))
    c = float(np.dot(offset, offset)) - sphere.radius ** 2
    disc = b * b - c
    if disc < 0.0:
        raise NoIntersection(f"Ray misses sphere (discriminant {disc:.3e})")
    root = math.sqrt(disc)
    near, far = b - root, b + root
    if near > 0.0:
        return ray.at(near)
    if far > 0.0:
        return ray.at(far)
    raise BehindCamera("Sphere lies behind the ray origin")


def reflect_about_normal(incoming, normal) -> Vec3:
    """r = 2(n·g)n - g; mirror image of g about the normal line"""
    g = vec3(incoming)
    n = vec3(normal)
    reflected = 2.0 * np.dot(n, g) * n - g
    return reflected / np.linalg.norm(reflected)


def surface_normal(sphere: Sphere, g) -> Vec3:
    """Unit normal from surface point G toward the center C (inward)"""
    g = vec3(g)
    inward = sphere.center - g
    distance = float(np.linalg.norm(inward))
    if abs(distance - sphere.radius) > SURFACE_TOLERANCE:
        raise OffSurface(f"Point is {distance - sphere.radius:.3e} mm off the sphere surface")
    return inward / distance


def point_to_ray_distance(led, ray_origin, direction, half_line=False) -> float:
    """Distance from a point to the line (or half-line) G + s·r"""
    diff = vec3(ray_origin) - vec3(led)
    r = vec3(direction)
    along = float(np.dot(diff, r))
    if half_line and along > 0.0:
        # the closest line point sits at s < 0, so the half-line clamps to its origin
        return float(np.linalg.norm(diff))
    return float(np.linalg.norm(diff - along * r))
