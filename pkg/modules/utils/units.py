# =============================================================================
# UTILS MODULE - Length Units
# File: modules/utils/units.py
# =============================================================================

import math
import re

from ..core.errors import ConfigError

_LENGTH_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(mm|cm|m)?\s*$")
_SCALE_TO_MM = {"mm": 1.0, "cm": 10.0, "m": 1000.0}


def parse_length(value, key="value"):
    """Parse a length to millimeters; bare numbers are already millimeters"""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a length, got {value!r}")
    if isinstance(value, (int, float)):
        result = float(value)
    elif isinstance(value, str):
        match = _LENGTH_RE.match(value)
        if not match:
            raise ConfigError(f"{key}: cannot parse length {value!r} (use mm, cm or m)")
        result = float(match.group(1)) * _SCALE_TO_MM[match.group(2) or "mm"]
    else:
        raise ConfigError(f"{key}: expected a length, got {value!r}")
    if not math.isfinite(result):
        raise ConfigError(f"{key}: length must be finite")
    return result


def parse_point(values, key="value"):
    """Parse a 3-element list of lengths to millimeters"""
    if not isinstance(values, (list, tuple)) or len(values) != 3:
        raise ConfigError(f"{key}: expected three lengths, got {values!r}")
    return [parse_length(v, key) for v in values]
