# =============================================================================
# SIMULATION MODULE - LED Rig
# File: modules/simulation/led_rig.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.errors import ConfigError
from ..utils.units import parse_length, parse_point


@dataclass(frozen=True, eq=False)
class LedRig:
    """IR LED positions L_1..L_n in camera coordinates (mm); label i is row i-1"""

    led_positions: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.led_positions, dtype=np.float64).reshape(-1, 3)
        for i in range(len(positions)):
            for j in range(i + 1, len(positions)):
                if np.allclose(positions[i], positions[j]):
                    raise ValueError(f"LEDs {i + 1} and {j + 1} coincide")
        object.__setattr__(self, "led_positions", positions)

    @property
    def count(self):
        return len(self.led_positions)

    @property
    def labels(self):
        return list(range(1, self.count + 1))

    def position(self, label):
        return self.led_positions[label - 1]

    @classmethod
    def square(cls, side=30.0, z=0.0):
        """Square rig centered on the camera: labels run clockwise from the top-left"""
        h = side / 2.0
        return cls(np.array([[-h, -h, z], [h, -h, z], [h, h, z], [-h, h, z]]))

    @classmethod
    def from_config(cls, config):
        explicit = config.get('rig.led_positions')
        if explicit is not None:
            if len(explicit) < 2:
                raise ConfigError("rig.led_positions needs at least two LEDs")
            return cls(np.array([parse_point(p, 'rig.led_positions') for p in explicit]))
        return cls.square(parse_length(config.get('rig.square_side', 30.0), 'rig.square_side'),
                          parse_length(config.get('rig.led_z', 0.0), 'rig.led_z'))
