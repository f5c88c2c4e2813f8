# =============================================================================
# DETECTION MODULE - PGM Frame IO
# File: modules/detection/pgm_io.py
# =============================================================================

from pathlib import Path

import numpy as np
import logging
from PIL import Image

from ..core.errors import DatasetFormatError

logger = logging.getLogger(__name__)


def write_pgm(path, image):
    """Binary (P5) 8-bit grayscale"""
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("PGM frames must be 2D uint8 arrays")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path, format='PPM')


def read_pgm(path):
    try:
        with Image.open(path) as img:
            if img.mode != 'L':
                raise DatasetFormatError(f"{path} is not an 8-bit grayscale frame (mode {img.mode})")
            return np.array(img, dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise DatasetFormatError(f"Cannot read frame {path}: {e}") from e
