class AquanavError(Exception):
    """Base class for every error raised by this package."""


class ProjectionDomainError(AquanavError, ValueError):
    pass


class InitializationError(AquanavError):
    pass


class OrderingError(AquanavError):
    """Timestamps went backwards or a step had non-positive length."""


class GapError(AquanavError):
    """IMU gap too long for a single prediction step; re-anchor instead."""


class SingularUpdateError(AquanavError):
    pass


class LogFormatError(AquanavError):
    pass


class SyncError(AquanavError):
    pass


class GridError(AquanavError):
    pass


class AlignmentError(AquanavError):
    pass
