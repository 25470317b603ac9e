"""Hierarchical topological mapping and planning for navigation under odometry drift."""

from hitmap.geometry import Frame, Pose2

__all__ = ["Frame", "Pose2"]
__version__ = "0.1.0"
