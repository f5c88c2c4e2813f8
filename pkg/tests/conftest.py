import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from modules.core.config_manager import ConfigManager  # noqa: E402
from modules.geometry.camera import PinholeCamera  # noqa: E402
from modules.simulation.eye_model import SubjectParams, eye_pose_for_target  # noqa: E402
from modules.simulation.led_rig import LedRig  # noqa: E402


@pytest.fixture
def camera():
    return PinholeCamera()


@pytest.fixture
def rig():
    return LedRig.square()


@pytest.fixture
def cross_rig():
    return LedRig(np.array([[20.0, 0.0, 0.0], [-20.0, 0.0, 0.0], [0.0, 20.0, 0.0], [0.0, -20.0, 0.0]]))


@pytest.fixture
def subject():
    return SubjectParams(0, (0.0, 0.0, 40.3), (5.0, 1.5))


@pytest.fixture
def zero_kappa_subject():
    return SubjectParams(1, (0.0, 0.0, 40.3), (0.0, 0.0))


@pytest.fixture
def straight_eye(subject):
    return eye_pose_for_target((0.0, 0.0, -465.0), subject)


@pytest.fixture
def config():
    return ConfigManager()


@pytest.fixture
def small_run_config():
    """Desk-sized experiment: two subjects, one frame per target"""
    return ConfigManager(overrides={
        "eye": {"eyeball_jitter": "0.5mm", "kappa_jitter_deg": 0.5},
        "noise": {"keypoint_sigma": 0.0, "cornea_sigma": 0.0},
        "solver": {"coarse_to_fine": True},
        "mapper": {"iterations": 200},
        "run": {"subjects": 2, "frames_per_target": 1, "workers": 2, "variants": ["oracle-poly"]},
    })


def random_eyes(subject, n, seed=0, max_deg=12.0):
    """Eye poses for random fixation targets half a meter away"""
    rng = np.random.default_rng(seed)
    eyes = []
    for _ in range(n):
        h, v = rng.uniform(-max_deg, max_deg, size=2)
        target = np.array([500.0 * np.tan(np.radians(h)), 500.0 * np.tan(np.radians(v)), 35.0 - 500.0])
        eyes.append(eye_pose_for_target(target, subject))
    return eyes
