# =============================================================================
# DETECTION MODULE - Adaptive Threshold and Blob Extraction
# File: modules/detection/thresholding.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import logging
from scipy import ndimage

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Ellipse:
    center: np.ndarray
    semi_major: float
    semi_minor: float
    angle: float  # major axis direction, radians from +u

    @property
    def eccentricity(self):
        if self.semi_major <= 0:
            return 0.0
        return float(np.sqrt(max(0.0, 1.0 - (self.semi_minor / self.semi_major) ** 2)))

    def to_dict(self):
        return {"center": self.center.tolist(), "semi_major": self.semi_major,
                "semi_minor": self.semi_minor, "angle": self.angle}


@dataclass(eq=False)
class Blob:
    pixels: np.ndarray  # (N, 2) rows of (row, col)
    centroid: np.ndarray  # (u, v)
    ellipse: Ellipse
    mean_intensity: float

    @property
    def area(self):
        return int(len(self.pixels))


def histogram_knee(image, p_bright=0.005, floor=0):
    """Smallest intensity T with at most a p_bright share of pixels above it, never below floor - 1"""
    image = np.asarray(image)
    counts = np.bincount(image.ravel().astype(np.int64), minlength=256)
    above = image.size - np.cumsum(counts)
    knee = int(np.argmax(above <= p_bright * image.size))
    return max(knee, int(floor) - 1)


def adaptive_threshold(image, p_bright=0.005, floor=0):
    """Binary mask of the brightest pixels; a uniform image gives an empty mask"""
    return np.asarray(image) > histogram_knee(image, p_bright, floor)


def moment_ellipse(coords, weights) -> Ellipse:
    """Ellipse with the same weighted first and second moments as the pixel set"""
    total = weights.sum()
    center = (weights[:, None] * coords).sum(axis=0) / total
    centered = coords - center
    cov = (weights[:, None, None] * centered[:, :, None] * centered[:, None, :]).sum(axis=0) / total
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals, 0.0, None)
    major = eigvecs[:, 1]
    return Ellipse(
        center=center,
        semi_major=float(2.0 * np.sqrt(eigvals[1])),
        semi_minor=float(2.0 * np.sqrt(eigvals[0])),
        angle=float(np.arctan2(major[1], major[0])),
    )


def extract_blobs(mask, image=None, background: Optional[float] = None,
                  min_area=1, max_area=None) -> List[Blob]:
    """4-connected components of the mask in raster order.

    With an image the centroid is intensity weighted, by (I - background)
    when a background level is given.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask)
    blobs = []
    for index, bbox in enumerate(ndimage.find_objects(labels), start=1):
        if bbox is None:
            continue
        rows, cols = np.nonzero(labels[bbox] == index)
        rows = rows + bbox[0].start
        cols = cols + bbox[1].start
        area = len(rows)
        if area < min_area or (max_area is not None and area > max_area):
            continue

        if image is None:
            values = np.ones(area)
            weights = values
        else:
            values = np.asarray(image, dtype=np.float64)[rows, cols]
            weights = values - background if background is not None else values
            if not weights.sum() > 0:
                weights = np.ones(area)

        coords = np.column_stack([cols, rows]).astype(np.float64)
        ellipse = moment_ellipse(coords, weights)
        blobs.append(Blob(
            pixels=np.column_stack([rows, cols]),
            centroid=ellipse.center.copy(),
            ellipse=ellipse,
            mean_intensity=float(values.mean()),
        ))
    logger.debug(f"Extracted {len(blobs)} of {count} components")
    return blobs
