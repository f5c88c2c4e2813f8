# =============================================================================
# CORE MODULE - Configuration Manager
# File: modules/core/config_manager.py
# =============================================================================

import copy
import hashlib
import json
from pathlib import Path
import logging

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "camera": {
        "focal_px": 600.0,
        "principal_point": None,
        "image_width": 640,
        "image_height": 480,
        "device_rotation": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        "device_translation": [0.0, 0.0, 0.0]
    },
    "rig": {
        "led_positions": None,
        "square_side": "30mm",
        "led_z": "0mm"
    },
    "eye": {
        "cornea_radius": "8mm",
        "cornea_radius_jitter": "0mm",
        "eyeball_to_cornea": "5.3mm",
        "eyeball_radius": "12mm",
        "iris_radius": "6mm",
        "pupil_radius": "1.25mm",
        "pupil_mode": "on-sphere",
        "pupil_anatomical_offset": "4.2mm",
        "eyeball_center": ["0mm", "0mm", "40.3mm"],
        "eyeball_jitter": "2mm",
        "kappa_deg": [5.0, 1.5],
        "kappa_jitter_deg": 1.0,
        "cornea_cap_deg": 60.0
    },
    "noise": {
        "keypoint_sigma": 0.5,
        "cornea_sigma": 0.5,
        "glint_dropout_prob": 0.0,
        "distractor_count_mean": 0.0
    },
    "solver": {
        "z_min": "10mm",
        "z_max": "50mm",
        "z_step": "0.001mm",
        "coarse_to_fine": False,
        "coarse_points": 400,
        "half_line": False,
        "refine_steps": 100,
        "step_size": 0.5,
        "glint_freedom": True,
        "tether_weight": 0.1,
        "prior_weight": 0.05,
        "fixed_point_max_iter": 100,
        "fixed_point_tol": 1e-9
    },
    "detect": {
        "p_bright": 0.005,
        "glint_min_intensity": 160,
        "min_blob_area": 2,
        "max_blob_area": 100,
        "max_candidate_blobs": 8,
        "pupil_max_intensity": 40,
        "min_pupil_area": 50,
        "glint_search_radius_px": 160.0,
        "absent_led_penalty": 0.05,
        "glint_sigma_px": 1.2,
        "background_level": 90,
        "sclera_level": 150,
        "iris_level": 60,
        "pupil_level": 10
    },
    "mapper": {
        "kind": "polynomial",
        "hidden_widths": [96, 96, 96, 96],
        "activation": "tanh",
        "optimizer": "adam",
        "iterations": 1500,
        "learning_rate": 0.001,
        "momentum": 0.9,
        "seed": 0
    },
    "run": {
        "subjects": 20,
        "frames_per_target": 10,
        "seed": 0,
        "variants": ["svd-net", "opt-net", "raw-net"],
        "detection_source": "noisy-oracle",
        "cornea_mode": "refine-lift",
        "mapper": "network",
        "workers": 4,
        "histogram_bin_arcmin": 10.0,
        "out_dir": "runs",
        "format": "csv"
    }
}

OUTPUT_ONLY_KEYS = (("run", "out_dir"), ("run", "format"), ("run", "workers"))


class ConfigManager:
    """Manages GlintGaze configuration: defaults, JSON file overrides, dot-path access"""

    def __init__(self, config_file=None, overrides=None):
        self.config_file = Path(config_file) if config_file else None
        self.default_config = copy.deepcopy(DEFAULT_CONFIG)
        self.load_config()
        if overrides:
            self.config = self._deep_merge(self.config, overrides)

    def load_config(self):
        if self.config_file is None:
            self.config = copy.deepcopy(self.default_config)
            return

        if not self.config_file.exists():
            raise ConfigError(f"Config file not found: {self.config_file}")
        try:
            with open(self.config_file, 'r') as f:
                loaded_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Error loading config {self.config_file}: {e}") from e

        if not isinstance(loaded_config, dict):
            raise ConfigError(f"{self.config_file}: top level must be an object")
        self.config = self._deep_merge(self.default_config, loaded_config)
        logger.info(f"Loaded config from {self.config_file}")

    def _deep_merge(self, default, loaded, path=""):
        """Deep merge configurations; keys absent from the defaults are rejected"""
        result = copy.deepcopy(default)
        for key, value in loaded.items():
            dotted = f"{path}.{key}" if path else key
            if key not in result:
                raise ConfigError(f"Unknown config key: {dotted}")
            if isinstance(result[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"Config section {dotted} must be an object")
                result[key] = self._deep_merge(result[key], value, dotted)
            else:
                result[key] = copy.deepcopy(value)
        return result

    def save_config(self, path=None):
        target = Path(path) if path else self.config_file
        if target is None:
            raise ConfigError("No config file to save to")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, 'w') as f:
                json.dump(self.config, f, indent=2)
        except OSError as e:
            logger.error(f"Error saving config: {e}")
            raise

    def get(self, key_path, default=None):
        keys = key_path.split('.')
        value = self.config
        for key in keys:
            if not isinstance(value, dict) or key not in value:
                return default
            value = value[key]
        return default if value is None else value

    def set(self, key_path, value):
        keys = key_path.split('.')
        section = self.config
        for key in keys[:-1]:
            if key not in section or not isinstance(section[key], dict):
                raise ConfigError(f"Unknown config section: {key_path}")
            section = section[key]
        if keys[-1] not in section:
            raise ConfigError(f"Unknown config key: {key_path}")
        section[keys[-1]] = value

    def section(self, name):
        return copy.deepcopy(self.config[name])

    def config_hash(self):
        """SHA-256 of the merged configuration, embedded in run outputs.

        Where and how results are written does not change them, so those
        keys are left out.
        """
        hashed = copy.deepcopy(self.config)
        for section, key in OUTPUT_ONLY_KEYS:
            hashed[section].pop(key, None)
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
