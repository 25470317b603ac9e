"""Planar rigid transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from hitmap.errors import FrameMismatch


class Frame(str, Enum):
    GROUND_TRUTH = "GroundTruth"
    ODOMETRY = "Odometry"
    CORRECTED = "Corrected"


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float = 0.0
    frame: Frame = Frame.GROUND_TRUTH

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "frame", Frame(self.frame))

    def _check(self, other: Pose2) -> None:
        if self.frame != other.frame:
            raise FrameMismatch(f"{self.frame.value} vs {other.frame.value}")

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: Pose2) -> Pose2:
        """Return ``self * other``: ``other`` expressed in ``self``'s local frame."""
        self._check(other)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
            self.frame,
        )

    def inverse(self) -> Pose2:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
            self.frame,
        )

    def relative(self, other: Pose2) -> Pose2:
        """Pose of ``other`` seen from ``self`` (``self^-1 * other``)."""
        self._check(other)
        return self.inverse().compose(other)

    def distance(self, other: Pose2) -> float:
        self._check(other)
        return math.hypot(self.x - other.x, self.y - other.y)

    def with_frame(self, frame: Frame) -> Pose2:
        return Pose2(self.x, self.y, self.theta, frame)

    def scaled(self, fraction: float) -> Pose2:
        """Componentwise scaling of (x, y, theta); used to spread a correction."""
        return Pose2(self.x * fraction, self.y * fraction, self.theta * fraction, self.frame)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map local points (N, 2) into the frame this pose lives in."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return pts @ rot.T + np.array([self.x, self.y])

    def inverse_transform_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return (pts - np.array([self.x, self.y])) @ rot

    def to_list(self) -> list:
        return [self.x, self.y, self.theta, self.frame.value]

    @classmethod
    def from_list(cls, data) -> Pose2:
        x, y, theta, frame = data
        return cls(x, y, theta, Frame(frame))
