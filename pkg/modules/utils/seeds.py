# =============================================================================
# UTILS MODULE - Deterministic Seeds
# File: modules/utils/seeds.py
# =============================================================================

import numpy as np


def frame_rng(seed, subject, frame):
    """Independent generator per (seed, subject, frame) so frames can be made in any order"""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(subject), int(frame), 1]))


def subject_rng(seed, subject):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(subject), 0]))
