"""Deterministic 2D grid world: file formats, range sensing, motion with drift,
and a proximity-based stand-in for place recognition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from hitmap.errors import BoundaryError, ParseError, PoseInObstacle
from hitmap.geometry import Frame, Pose2, wrap_angle
from hitmap.raycast import segment_cells, traverse

FREE = 0
OBSTACLE = 1


@dataclass(eq=False)
class World:
    """Closed occupancy world. Arrays are indexed ``[iy, ix]`` with iy=0 at the bottom."""

    width_cells: int
    height_cells: int
    resolution: float
    cells: np.ndarray
    elevation: np.ndarray | None = None
    max_step: float = 0.15

    def __post_init__(self):
        if self.width_cells <= 0 or self.height_cells <= 0:
            raise ParseError("world dimensions must be positive")
        if self.resolution <= 0:
            raise ParseError("resolution must be positive")
        self.cells = np.asarray(self.cells, dtype=np.uint8).reshape(self.height_cells, self.width_cells)
        if self.elevation is None:
            self.elevation = np.zeros((self.height_cells, self.width_cells))
        else:
            self.elevation = np.asarray(self.elevation, dtype=float).reshape(self.height_cells, self.width_cells)
        c = self.cells
        border = np.concatenate([c[0], c[-1], c[:, 0], c[:, -1]])
        if np.any(border != OBSTACLE):
            raise BoundaryError("world boundary must be closed by obstacle cells")
        self.cells.setflags(write=False)
        self.elevation.setflags(write=False)

    @property
    def size(self) -> tuple[float, float]:
        return self.width_cells * self.resolution, self.height_cells * self.resolution

    @property
    def has_relief(self) -> bool:
        return bool(np.any(self.elevation != 0.0))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def in_bounds(self, ix, iy):
        return (ix >= 0) & (ix < self.width_cells) & (iy >= 0) & (iy < self.height_cells)

    def is_obstacle(self, ix, iy):
        """Vectorized lookup; out-of-bounds cells count as obstacles."""
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        inside = self.in_bounds(ix, iy)
        out = np.ones(ix.shape, dtype=bool)
        out[inside] = self.cells[iy[inside], ix[inside]] == OBSTACLE
        return out

    def height_at(self, ix, iy):
        ix = np.clip(np.asarray(ix), 0, self.width_cells - 1)
        iy = np.clip(np.asarray(iy), 0, self.height_cells - 1)
        return self.elevation[iy, ix]

    def is_free_point(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        return not bool(self.is_obstacle(np.array([ix]), np.array([iy]))[0])


# ---------------------------------------------------------------- file formats


def _rows_to_array(rows: list[list[int]], what: str) -> np.ndarray:
    if not rows:
        raise ParseError(f"empty {what}")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"ragged {what}: row {i} has {len(r)} cells, expected {width}")
    # files list rows top to bottom
    return np.array(rows[::-1])


def parse_ascii_world(text: str) -> World:
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ParseError("empty world file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "resolution":
        raise ParseError("first line must be 'resolution <meters>'")
    try:
        res = float(head[1])
    except ValueError as exc:
        raise ParseError(f"bad resolution {head[1]!r}") from exc
    rows = []
    for ln in lines[1:]:
        row = []
        for ch in ln:
            if ch == "#":
                row.append(OBSTACLE)
            elif ch == ".":
                row.append(FREE)
            else:
                raise ParseError(f"unexpected character {ch!r}")
        rows.append(row)
    grid = _rows_to_array(rows, "grid")
    return World(grid.shape[1], grid.shape[0], res, grid)


def parse_json_world(text: str) -> World:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc
    try:
        res = float(data["resolution"])
        grid = _rows_to_array(data["cells"], "cells")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed world json: {exc}") from exc
    if not np.isin(grid, (FREE, OBSTACLE)).all():
        raise ParseError("cells must be 0 (free) or 1 (obstacle)")
    elev = None
    if data.get("elevation") is not None:
        elev = _rows_to_array(data["elevation"], "elevation").astype(float)
        if elev.shape != grid.shape:
            raise ParseError("elevation shape differs from cells")
    return World(grid.shape[1], grid.shape[0], res, grid, elev, float(data.get("max_step", 0.15)))


def load_world(path) -> World:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return parse_json_world(text)
    return parse_ascii_world(text)


def world_to_ascii(world: World) -> str:
    if world.has_relief:
        raise ValueError("ASCII format cannot carry elevation; use JSON")
    lines = [f"resolution {world.resolution!r}"]
    for row in world.cells[::-1]:
        lines.append("".join("#" if v == OBSTACLE else "." for v in row))
    return "\n".join(lines) + "\n"


def world_to_json(world: World) -> str:
    data = {
        "resolution": world.resolution,
        "max_step": world.max_step,
        "cells": world.cells[::-1].astype(int).tolist(),
    }
    if world.has_relief:
        data["elevation"] = world.elevation[::-1].tolist()
    return json.dumps(data, separators=(",", ":"))


def save_world(world: World, path) -> None:
    path = Path(path)
    path.write_text(world_to_json(world) if path.suffix == ".json" else world_to_ascii(world))


# ---------------------------------------------------------------------- sensor


class SensorKind(str, Enum):
    DEPTH_CAMERA = "DepthCamera"
    LIDAR = "Lidar"


@dataclass(frozen=True)
class SensorModel:
    max_range: float = 5.0
    fov: float = math.radians(120.0)
    angular_resolution: float = math.radians(1.0)
    kind: SensorKind = SensorKind.DEPTH_CAMERA

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if not (0 < self.fov <= 2 * math.pi + 1e-12):
            raise ValueError("fov must lie in (0, 2*pi]")
        ratio = self.fov / self.angular_resolution
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("angular_resolution must divide fov evenly")
        object.__setattr__(self, "kind", SensorKind(self.kind))

    @property
    def n_beams(self) -> int:
        return int(round(self.fov / self.angular_resolution)) + 1

    def bearings(self) -> np.ndarray:
        return np.linspace(-self.fov / 2.0, self.fov / 2.0, self.n_beams)


@dataclass
class RangeScan:
    origin: Pose2
    bearings: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    max_range: float
    # terrain height sampled along each beam at (k + 0.5) * height_step
    heights: np.ndarray | None = None
    height_step: float = 0.0

    @property
    def beams(self) -> list[tuple[float, float, bool]]:
        return [(float(b), float(r), bool(h)) for b, r, h in zip(self.bearings, self.ranges, self.hits)]

    def __len__(self) -> int:
        return len(self.bearings)


def sense(world: World, true_pose: Pose2, sensor: SensorModel) -> RangeScan:
    """Cast every beam until it enters an obstacle cell or reaches max range."""
    if not world.is_free_point(true_pose.x, true_pose.y):
        raise PoseInObstacle(f"pose ({true_pose.x:.3f}, {true_pose.y:.3f}) lies in an obstacle")
    bearings = sensor.bearings()
    angles = true_pose.theta + bearings
    tr = traverse((true_pose.x, true_pose.y), angles, sensor.max_range, world.resolution)
    blocked = world.is_obstacle(tr.ix, tr.iy)
    side = world.is_obstacle(*tr.side_a) | world.is_obstacle(*tr.side_b)
    blocked |= tr.corner & side
    blocked &= tr.t_entry < sensor.max_range
    blocked[:, 0] = False
    any_hit = blocked.any(axis=1)
    first = np.argmax(blocked, axis=1)
    t_hit = tr.t_entry[np.arange(len(angles)), first]
    ranges = np.where(any_hit, np.minimum(t_hit, sensor.max_range), sensor.max_range)
    hits = any_hit & (t_hit < sensor.max_range)

    heights = None
    h_step = 0.0
    if world.has_relief:
        h_step = world.resolution / 2.0
        n = int(math.ceil(sensor.max_range / h_step))
        d = (np.arange(n) + 0.5) * h_step
        px = true_pose.x + np.cos(angles)[:, None] * d[None, :]
        py = true_pose.y + np.sin(angles)[:, None] * d[None, :]
        heights = world.height_at(
            np.floor(px / world.resolution).astype(np.int64),
            np.floor(py / world.resolution).astype(np.int64),
        )
    return RangeScan(true_pose, bearings, ranges, hits, sensor.max_range, heights, h_step)


# ---------------------------------------------------------------------- motion


@dataclass
class DriftModel:
    """Odometry drift: a seeded per-mission bias plus per-step jitter, both
    scaled by the distance traveled in the step."""

    trans_drift_per_meter: float = 0.0
    rot_drift_per_meter: float = 0.0
    seed: int = 0
    _rng: np.random.Generator | None = field(default=None, init=False, repr=False)
    _bias: np.ndarray | None = field(default=None, init=False, repr=False)

    @property
    def is_zero(self) -> bool:
        return self.trans_drift_per_meter == 0.0 and self.rot_drift_per_meter == 0.0

    def reset(self) -> None:
        self._rng = None
        self._bias = None

    def perturbation(self, distance: float) -> tuple[float, float, float]:
        """(along-track, cross-track, heading) error for one step."""
        if self.is_zero:
            return 0.0, 0.0, 0.0
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
            self._bias = self._rng.standard_normal(3)
        jitter = self._rng.standard_normal(3)
        k = self._bias + 0.5 * jitter
        return (
            distance * self.trans_drift_per_meter * float(k[0]),
            distance * self.trans_drift_per_meter * float(k[1]),
            distance * self.rot_drift_per_meter * float(k[2]),
        )


@dataclass
class StepResult:
    true_pose: Pose2
    odom_pose: Pose2
    collided: bool
    distance: float


def _advance(pose: Pose2, length: float, chord_angle: float, dtheta: float,
             d_along: float = 0.0, d_cross: float = 0.0, d_theta: float = 0.0) -> Pose2:
    # shared by ground truth and odometry so zero drift reproduces truth bit for bit
    h = pose.theta + chord_angle
    c, s = math.cos(h), math.sin(h)
    along = length + d_along
    return Pose2(
        pose.x + along * c - d_cross * s,
        pose.y + along * s + d_cross * c,
        pose.theta + dtheta + d_theta,
        pose.frame,
    )


def _motion_blocked_at(world: World, p0: np.ndarray, p1: np.ndarray) -> float | None:
    """Distance along p0->p1 where the motion first enters an impassable cell."""
    ix, iy, t = segment_cells(p0, p1, world.resolution)
    if len(ix) <= 1:
        return None
    obstacle = world.is_obstacle(ix, iy)
    h = world.height_at(ix, iy)
    jump = np.zeros(len(ix), dtype=bool)
    jump[1:] = np.abs(np.diff(h)) > world.max_step
    bad = obstacle | jump
    bad[0] = False
    if not bad.any():
        return None
    return float(t[int(np.argmax(bad))])


def step(world: World, true_pose: Pose2, odom_pose: Pose2, command: tuple[float, float],
         dt: float, drift: DriftModel) -> StepResult:
    """Integrate unicycle kinematics for ``dt`` seconds; collisions clamp the motion."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, w = float(command[0]), float(command[1])
    dtheta = w * dt
    if abs(w) < 1e-12:
        length = v * dt
    else:
        # chord of the arc traced by constant (v, w)
        length = 2.0 * (v / w) * math.sin(dtheta / 2.0)
    chord_angle = dtheta / 2.0
    if length < 0:
        length = -length
        chord_angle += math.pi
    collided = False
    if length > 0:
        p0 = true_pose.xy
        h = true_pose.theta + chord_angle
        p1 = p0 + length * np.array([math.cos(h), math.sin(h)])
        t_block = _motion_blocked_at(world, p0, p1)
        if t_block is not None:
            collided = True
            frac = max(0.0, t_block - 1e-3) / length
            length *= frac
            dtheta *= frac
    new_true = _advance(true_pose, length, chord_angle, dtheta)
    da, dc, dr = drift.perturbation(length)
    new_odom = _advance(odom_pose, length, chord_angle, dtheta, da, dc, dr)
    return StepResult(new_true, new_odom, collided, length)


# ---------------------------------------------------------- place recognition


def detect_loop(history: list[tuple[int, Pose2]], current_true_pose: Pose2, radius: float,
                exclude: set[int] | frozenset = frozenset()) -> int | None:
    """Oldest submap whose true anchor is within ``radius`` of the robot.

    ``history`` is in creation order; its last entry is the current submap and
    the one before it the previous submap, neither of which is ever returned.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    for sid, anchor in history[:-2]:
        if sid in exclude:
            continue
        if math.hypot(anchor.x - current_true_pose.x, anchor.y - current_true_pose.y) <= radius:
            return sid
    return None


def ground_truth_relative(a: Pose2, b: Pose2) -> Pose2:
    """Relative pose between two ground-truth anchors, tagged Corrected."""
    return a.relative(b).with_frame(Frame.CORRECTED)


__all__ = [
    "World", "FREE", "OBSTACLE", "load_world", "save_world", "parse_ascii_world",
    "parse_json_world", "world_to_ascii", "world_to_json", "SensorKind", "SensorModel",
    "RangeScan", "sense", "DriftModel", "StepResult", "step", "detect_loop",
    "ground_truth_relative", "wrap_angle",
]
