# =============================================================================
# EVALUATION MODULE - Metrics
# File: modules/evaluation/metrics.py
# =============================================================================

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..geometry.primitives import angle_between

ARCMIN_PER_RADIAN = 180.0 / np.pi * 60.0


def angular_error_arcmin(a, b) -> float:
    """Angle between two unit directions in arcminutes"""
    return angle_between(a, b) * ARCMIN_PER_RADIAN


def _positions(glints):
    """label -> position for present glints, from GlintObservation lists or dicts"""
    if isinstance(glints, dict):
        return {label: np.asarray(p, dtype=np.float64) for label, p in glints.items() if p is not None}
    return {g.label: g.position for g in glints if g.present}


def labeled_euclidean_error(truth, predicted) -> float:
    """Sum over labels present on both sides of the glint position error in pixels"""
    truth, predicted = _positions(truth), _positions(predicted)
    return float(sum(np.linalg.norm(truth[label] - predicted[label]) for label in sorted(truth.keys() & predicted.keys())))


def unmatched_labels(truth, predicted) -> int:
    """Labels present on exactly one side; excluded from the labeled error"""
    return len(_positions(truth).keys() ^ _positions(predicted).keys())


def presence_matches(truth, predicted):
    """(labels whose presence flag agrees, labels compared)"""
    truth_flags = {g.label: g.present for g in truth}
    predicted_flags = {g.label: g.present for g in predicted}
    labels = sorted(truth_flags)
    return sum(truth_flags[label] == predicted_flags.get(label, False) for label in labels), len(labels)


@dataclass
class ErrorStats:
    count: int = 0
    mean: float = float('nan')
    std: float = float('nan')
    q1: float = float('nan')
    q2: float = float('nan')
    q3: float = float('nan')
    max: float = float('nan')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def error_stats(values) -> ErrorStats:
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        return ErrorStats()
    q1, q2, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    return ErrorStats(
        count=int(values.size),
        mean=float(values.mean()),
        std=float(values.std()),
        q1=float(q1),
        q2=float(q2),
        q3=float(q3),
        max=float(values.max()),
    )


def error_histogram(values, bin_width):
    """[(lower, upper, count)] over [0, max] in bins of bin_width; counts sum to len(values)"""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        return []
    n_bins = max(1, int(np.floor(values.max() / bin_width)) + 1)
    edges = bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)]


def paired_bootstrap_ci(a, b, n_boot=2000, level=0.95, seed=0):
    """Bootstrap CI of mean(a - b) over paired samples"""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if diff.size == 0:
        return float('nan'), float('nan')
    rng = np.random.default_rng(seed)
    means = diff[rng.integers(0, diff.size, size=(n_boot, diff.size))].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return float(lo), float(hi)
