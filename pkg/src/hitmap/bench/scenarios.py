"""Built-in benchmark worlds and their mission configs."""

from __future__ import annotations

import math

import numpy as np

from hitmap.bench.config import ScenarioConfig
from hitmap.world import World


def _closed(width_m: float, height_m: float, res: float) -> np.ndarray:
    w = int(round(width_m / res))
    h = int(round(height_m / res))
    cells = np.zeros((h, w), dtype=np.uint8)
    cells[0, :] = cells[-1, :] = 1
    cells[:, 0] = cells[:, -1] = 1
    return cells


def _block(cells: np.ndarray, res: float, x0: float, y0: float, x1: float, y1: float, value=1) -> None:
    c0, c1 = int(round(x0 / res)), int(round(x1 / res))
    r0, r1 = int(round(y0 / res)), int(round(y1 / res))
    cells[r0:r1, c0:c1] = value


def open_room(size: float = 10.0, res: float = 0.1) -> World:
    cells = _closed(size, size, res)
    return World(cells.shape[1], cells.shape[0], res, cells)


def bug_trap(res: float = 0.1) -> World:
    """15 m x 20 m room with a cup open to the south around the start; the goal
    lies beyond the cup's closed end."""
    cells = _closed(15.0, 20.0, res)
    _block(cells, res, 4.0, 9.0, 11.0, 9.3)  # closed end
    _block(cells, res, 4.0, 3.0, 4.3, 9.3)  # west arm
    _block(cells, res, 10.7, 3.0, 11.0, 9.3)  # east arm
    return World(cells.shape[1], cells.shape[0], res, cells)


def corridor_loop(res: float = 0.2) -> World:
    """60 m x 70 m ring corridor around a solid central block."""
    cells = _closed(60.0, 70.0, res)
    _block(cells, res, 5.0, 5.0, 55.0, 65.0)
    return World(cells.shape[1], cells.shape[0], res, cells)


def low_wall(res: float = 0.1, height: float = 0.3) -> World:
    """Open 15 m x 15 m room crossed by a wall too low to block sight but too
    high to drive over; it leaves a gap at the east end."""
    cells = _closed(15.0, 15.0, res)
    elev = np.zeros(cells.shape)
    _block(elev, res, 0.0, 10.0, 11.0, 10.2, value=height)
    return World(cells.shape[1], cells.shape[0], res, cells, elev)


def small_loop(res: float = 0.1) -> World:
    """12 m x 12 m ring around a central pillar; one lap closes one loop."""
    cells = _closed(12.0, 12.0, res)
    _block(cells, res, 3.5, 3.5, 8.5, 8.5)
    return World(cells.shape[1], cells.shape[0], res, cells)


def sealed_chamber(res: float = 0.1) -> World:
    """Open room with a closed chamber the robot can never enter."""
    cells = _closed(10.0, 10.0, res)
    _block(cells, res, 6.0, 6.0, 10.0, 6.3)
    _block(cells, res, 6.0, 6.0, 6.3, 9.9)
    return World(cells.shape[1], cells.shape[0], res, cells)


WORLDS = {
    "open_room": open_room,
    "bug_trap": bug_trap,
    "corridor_loop": corridor_loop,
    "low_wall": low_wall,
    "small_loop": small_loop,
    "sealed_chamber": sealed_chamber,
}


def config_for(name: str, world_path: str = "", **overrides) -> ScenarioConfig:
    """Mission config matching each built-in world."""
    if name == "open_room":
        base = ScenarioConfig.simulation(world=world_path, start=(2.0, 5.0, 0.0), goal=(5.0, 5.0),
                                         frames=2000)
    elif name == "bug_trap":
        base = ScenarioConfig.simulation(world=world_path, start=(7.5, 6.0, math.pi / 2), goal=(7.5, 16.0),
                                         trans_drift_per_meter=0.005, rot_drift_per_meter=0.001)
    elif name == "corridor_loop":
        base = ScenarioConfig.real_world(
            world=world_path, start=(2.5, 2.5, 0.0),
            waypoints=[(57.5, 2.5), (57.5, 67.5), (2.5, 67.5)], goal=(2.5, 12.0),
            trans_drift_per_meter=0.002, rot_drift_per_meter=0.00002, frames=6000,
        )
    elif name == "low_wall":
        base = ScenarioConfig.simulation(world=world_path, start=(2.0, 8.5, 0.0), waypoints=[(2.0, 11.5)],
                                         goal=(2.0, 8.5), loop_radius=3.5)
    elif name == "small_loop":
        base = ScenarioConfig.simulation(world=world_path, start=(1.75, 1.75, 0.0),
                                         waypoints=[(10.25, 1.75), (10.25, 10.25), (1.75, 10.25)],
                                         goal=(1.75, 3.5), trans_drift_per_meter=0.01,
                                         rot_drift_per_meter=0.002, loop_radius=2.5, frames=4000)
    elif name == "sealed_chamber":
        base = ScenarioConfig.simulation(world=world_path, start=(2.0, 2.0, 0.0), goal=(7.5, 7.5),
                                         frames=4000)
    else:
        raise KeyError(name)
    return base.with_overrides(**overrides) if overrides else base
