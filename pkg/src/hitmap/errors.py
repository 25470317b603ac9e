"""Exception types raised across the package."""


class HiTMapError(Exception):
    pass


class FrameMismatch(HiTMapError):
    """Pose arithmetic or map update attempted across coordinate frames."""


class ParseError(HiTMapError):
    pass


class BoundaryError(HiTMapError):
    pass


class PoseInObstacle(HiTMapError):
    pass


class RobotCellNotTraversable(HiTMapError):
    pass


class UnknownSubmapId(HiTMapError, KeyError):
    pass


class NonConsecutiveIds(HiTMapError):
    pass


class ValidationNotPerformed(HiTMapError):
    pass


class NoSuchLoopEdge(HiTMapError):
    pass


class NoPath(HiTMapError):
    pass


class NoFrontiers(HiTMapError):
    pass


class ConfigError(HiTMapError):
    pass
