# =============================================================================
# CORE MODULE - Errors
# File: modules/core/errors.py
# =============================================================================


class GlintGazeError(Exception):
    """Base class for every error raised by GlintGaze"""


class ConfigError(GlintGazeError):
    """Invalid or unknown configuration"""


class DatasetFormatError(GlintGazeError):
    """A dataset, observation or mapper file does not match its schema"""


class ReportWriteError(GlintGazeError):
    """Writing a report file failed"""

    def __init__(self, path, cause):
        super().__init__(f"Cannot write {path}: {cause}")
        self.path = path
        self.cause = cause


class GeometryError(GlintGazeError):
    """A geometric solve has no valid answer for this frame"""


class NonPositiveDepth(GeometryError):
    pass


class NoIntersection(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class OffSurface(GeometryError):
    pass


class InsufficientConstraints(GeometryError):
    pass


class DegenerateSystem(GeometryError):
    pass


class DegenerateGeometry(GeometryError):
    pass


class DegenerateLine(GeometryError):
    pass


class NoConvergence(GeometryError):
    pass


class InsufficientGlints(GeometryError):
    pass


class NoFeasibleZ(GeometryError):
    pass


class CoincidentPoints(GeometryError):
    pass


class PupilNotFound(GeometryError):
    pass


class RankDeficient(GlintGazeError):
    """Calibration design matrix does not determine the mapper"""


class NonFiniteLoss(GlintGazeError):
    """Mapper training diverged"""

    def __init__(self, iteration, loss):
        super().__init__(f"Non-finite training loss {loss} at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss
