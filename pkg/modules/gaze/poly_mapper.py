# =============================================================================
# GAZE MODULE - Polynomial Axis Mapper
# File: modules/gaze/poly_mapper.py
# =============================================================================
"""Second-order polynomial map from the optical to the visual axis.

Directions are reduced to tangent coordinates (x/z, y/z); each output
coordinate is a least-squares fit over {1, x, y, x^2, xy, y^2}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import logging

from ..core.errors import RankDeficient
from ..geometry.primitives import angle_between
from .calibration import CalibrationSet

logger = logging.getLogger(__name__)

N_TERMS = 6


def tangent_coordinates(directions):
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    if np.any(np.abs(directions[:, 2]) < 1e-12):
        raise ValueError("tangent coordinates need a non-zero z component")
    return directions[:, :2] / directions[:, 2:3]


def design_matrix(tangent):
    x, y = tangent[:, 0], tangent[:, 1]
    return np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])


@dataclass(eq=False)
class PolyMapper:
    coefficients: np.ndarray  # (2, 6)
    residual_rms: float = 0.0
    max_residual_arcmin: float = 0.0
    kind = "polynomial"

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64).reshape(2, N_TERMS)

    def map_many(self, directions):
        directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        tangent = design_matrix(tangent_coordinates(directions)) @ self.coefficients.T
        out = np.column_stack([tangent, np.ones(len(tangent))]) * np.sign(directions[:, 2:3])
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def map(self, direction):
        return self.map_many(direction)[0]

    def to_dict(self):
        return {"coefficients": self.coefficients.tolist(), "residual_rms": self.residual_rms,
                "max_residual_arcmin": self.max_residual_arcmin}

    @classmethod
    def from_dict(cls, data):
        return cls(np.array(data["coefficients"], dtype=np.float64), float(data["residual_rms"]),
                   float(data.get("max_residual_arcmin", 0.0)))


def fit_poly_mapper(calib: CalibrationSet) -> PolyMapper:
    if len(calib) < N_TERMS:
        raise RankDeficient(f"Polynomial mapper needs {N_TERMS} or more calibration pairs, got {len(calib)}")
    a = design_matrix(tangent_coordinates(calib.optical))
    b = tangent_coordinates(calib.visual)
    coefficients, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < N_TERMS:
        raise RankDeficient(f"Calibration design matrix has rank {rank} < {N_TERMS}")

    residual = a @ coefficients - b
    mapper = PolyMapper(coefficients.T, residual_rms=float(np.sqrt(np.mean(residual ** 2))))
    mapped = mapper.map_many(calib.optical)
    mapper.max_residual_arcmin = float(max(np.degrees(angle_between(m, v)) * 60.0
                                           for m, v in zip(mapped, calib.visual)))
    logger.info(f"Polynomial mapper fit on {len(calib)} pairs: residual RMS {mapper.residual_rms:.3e}, "
                f"max {mapper.max_residual_arcmin:.3f} arcmin")
    return mapper
