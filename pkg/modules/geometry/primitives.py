# =============================================================================
# GEOMETRY MODULE - Primitives
# File: modules/geometry/primitives.py
# =============================================================================
"""Points, unit vectors, rays and spheres in camera-centered millimeters.

Points and vectors are plain float64 numpy arrays; ``Ray3`` and ``Sphere``
are frozen dataclasses that validate their invariants on construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]
Vec2 = NDArray[np.float64]

UNIT_TOLERANCE = 1e-12
ORIGIN = np.zeros(3)


def vec3(x, y=None, z=None) -> Vec3:
    if y is None:
        out = np.asarray(x, dtype=np.float64).reshape(3)
    else:
        out = np.array([x, y, z], dtype=np.float64)
    return out


def vec2(u, v=None) -> Vec2:
    if v is None:
        return np.asarray(u, dtype=np.float64).reshape(2)
    return np.array([u, v], dtype=np.float64)


def normalize(v) -> Vec3:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError(f"Cannot normalize vector {v}")
    return v / norm


def is_unit(v, tol=UNIT_TOLERANCE) -> bool:
    return abs(np.linalg.norm(v) - 1.0) <= tol


def angle_between(a, b) -> float:
    """Angle in radians, stable for nearly parallel vectors"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


@dataclass(frozen=True, eq=False)
class Ray3:
    origin: Vec3
    direction: Vec3

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        object.__setattr__(self, "direction", vec3(self.direction))
        if not is_unit(self.direction):
            raise ValueError("Ray3 direction must be a unit vector")

    def at(self, t) -> Vec3:
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class Sphere:
    center: Vec3
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        if not self.radius > 0:
            raise ValueError("Sphere radius must be positive")
