"""Kinematic pure-pursuit path follower."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hitmap.geometry import wrap_angle


@dataclass(frozen=True)
class Follower:
    max_speed: float = 0.5
    max_turn_rate: float = 1.5
    lookahead: float = 0.5
    turn_in_place: float = math.pi / 4
    heading_gain: float = 2.0

    def lookahead_point(self, x: float, y: float, waypoints) -> np.ndarray:
        pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
        if len(pts) == 1:
            return pts[0]
        # closest point on the polyline, then walk ``lookahead`` further along it
        a, b = pts[:-1], pts[1:]
        d = b - a
        seg_len2 = np.maximum((d * d).sum(axis=1), 1e-18)
        t = np.clip(((x - a[:, 0]) * d[:, 0] + (y - a[:, 1]) * d[:, 1]) / seg_len2, 0.0, 1.0)
        proj = a + d * t[:, None]
        dist = np.hypot(proj[:, 0] - x, proj[:, 1] - y)
        k = int(np.argmin(dist))
        remaining = self.lookahead
        p = proj[k]
        for j in range(k, len(a)):
            seg_end = b[j]
            left = float(np.hypot(*(seg_end - p)))
            if left >= remaining:
                return p + (seg_end - p) * (remaining / max(left, 1e-18))
            remaining -= left
            p = seg_end
        return pts[-1]

    def command(self, x: float, y: float, theta: float, waypoints, dt: float,
                stop_at_end: bool = True) -> tuple[float, float]:
        target = self.lookahead_point(x, y, waypoints)
        dx, dy = target[0] - x, target[1] - y
        dist = math.hypot(dx, dy)
        if dist < 1e-9:
            return 0.0, 0.0
        err = wrap_angle(math.atan2(dy, dx) - theta)
        w = max(-self.max_turn_rate, min(self.max_turn_rate, self.heading_gain * err))
        if abs(err) > self.turn_in_place:
            return 0.0, w
        v = self.max_speed * math.cos(err)
        if stop_at_end:
            end = np.asarray(waypoints[-1], dtype=float)
            v = min(v, math.hypot(end[0] - x, end[1] - y) / dt)
        return max(v, 0.0), w
