# =============================================================================
# DETECTION MODULE - Detection Thresholds
# File: modules/detection/detect_config.py
# =============================================================================

from dataclasses import asdict, dataclass

from ..core.errors import ConfigError


@dataclass(frozen=True)
class DetectConfig:
    """Every hand-tuned threshold of the classical stage, reported with results"""

    p_bright: float = 0.005
    glint_min_intensity: int = 160
    min_blob_area: int = 2
    max_blob_area: int = 100
    max_candidate_blobs: int = 8
    pupil_max_intensity: int = 40
    min_pupil_area: int = 50
    glint_search_radius_px: float = 160.0
    absent_led_penalty: float = 0.05
    glint_sigma_px: float = 1.2
    background_level: int = 90
    sclera_level: int = 150
    iris_level: int = 60
    pupil_level: int = 10

    @classmethod
    def from_config(cls, config):
        section = config.section('detect')
        return cls(**{key: _coerce(key, type(getattr(cls, key)), value) for key, value in section.items()})

    def to_dict(self):
        return asdict(self)


def _coerce(key, kind, value):
    """Convert a config value to the threshold's type; lossy conversions are errors"""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"detect.{key} must be a number, got {value!r}")
    converted = kind(value)
    if converted != value:
        raise ConfigError(f"detect.{key} must be an integer, got {value!r}")
    return converted