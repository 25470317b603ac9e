"""Two-mode planner over the local area and the global topology.

Backtracing runs A* on the merged local roadmap. Exploration picks a global
waypoint among all stored frontiers by weighted goal distance plus shift cost,
then reduces to a local A* problem: straight to the frontier when its submap
is in the local area, otherwise towards the next submap on the topological
route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from hitmap.errors import ConfigError, NoFrontiers, NoPath
from hitmap.search import astar


class Mode(str, Enum):
    BACKTRACING = "Backtracing"
    EXPLORATION = "Exploration"


@dataclass(frozen=True)
class CostWeights:
    w_d: float = 0.8
    w_l: float = 0.2

    def __post_init__(self):
        if self.w_d < 0 or self.w_l < 0 or self.w_d + self.w_l <= 0:
            raise ConfigError(f"invalid cost weights ({self.w_d}, {self.w_l})")

    @classmethod
    def parse(cls, text: str) -> CostWeights:
        try:
            wd, wl = (float(t) for t in text.split(","))
        except ValueError:
            raise ConfigError(f"weights must look like 'wd,wl', got {text!r}") from None
        return cls(wd, wl)


@dataclass
class PlannerState:
    goal: tuple[float, float]
    mode: Mode = Mode.EXPLORATION
    last_waypoint: tuple[float, float] | None = None
    # frontier keys found unreachable; cleared when the topology changes
    blacklist: set = field(default_factory=set)
    waypoint_key: tuple[int, int] | None = None


@dataclass
class Plan:
    mode: Mode
    waypoints: list
    graph_path: list
    cost: float
    keys: list = field(default_factory=list)
    topology_path: list = field(default_factory=list)
    target: tuple[int, int] | None = None

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "waypoints": [[float(x), float(y)] for x, y in self.waypoints],
            "graph_path": [int(i) for i in self.graph_path],
            "vertex_keys": [[int(s), int(v)] for s, v in self.keys],
            "topology_path": [int(i) for i in self.topology_path],
            "cost": float(self.cost),
        }

    @classmethod
    def from_json(cls, data: dict) -> Plan:
        return cls(
            Mode(data["mode"]),
            [tuple(p) for p in data["waypoints"]],
            list(data["graph_path"]),
            float(data["cost"]),
            [tuple(k) for k in data.get("vertex_keys", [])],
            list(data.get("topology_path", [])),
        )


@dataclass(frozen=True)
class FrontierEntry:
    submap_id: int
    vertex_id: int
    position: tuple[float, float]

    @property
    def key(self) -> tuple[int, int]:
        return self.submap_id, self.vertex_id


def frontier_index(submaps) -> list[FrontierEntry]:
    """All frontier vertices of all stored submaps, in the Corrected frame."""
    out = []
    for sm in submaps.values():
        mask = sm.roadmap.is_frontier
        if not mask.any():
            continue
        pts = sm.anchor.transform_points(sm.roadmap.positions[mask])
        for vid, p in zip(sm.roadmap.ids[mask], pts):
            out.append(FrontierEntry(sm.id, int(vid), (float(p[0]), float(p[1]))))
    return out


# ------------------------------------------------------------------ attachment


def attach(area, point, radius: float, check_segment: bool = True) -> int | None:
    """Merged vertex index the point connects to, nearest first; None if none."""
    tree = area.tree()
    if tree is None:
        return None
    p = np.asarray(point, dtype=float)
    cand = tree.query_ball_point(p, radius + 1e-9)
    if not cand:
        return None
    cand = np.array(sorted(cand))
    d = np.hypot(*(area.positions[cand] - p).T)
    order = np.lexsort((cand, d))
    cand = cand[order]
    if not check_segment:
        return int(cand[0])
    clear = area.segments_clear(np.repeat(p[None], len(cand), axis=0), area.positions[cand])
    hit = np.flatnonzero(clear)
    return int(cand[hit[0]]) if len(hit) else None


def attach_start(area, point, radius: float) -> int | None:
    """The robot always sits on the map it just built; fall back to the nearest
    vertex when inflation hides its own cell."""
    v = attach(area, point, radius)
    if v is None:
        v = attach(area, point, 2.0 * radius)
    if v is None:
        v = attach(area, point, 4.0 * radius, check_segment=False)
    return v


def select_mode(area, goal, attach_radius: float) -> Mode:
    if attach_radius <= 0:
        raise ValueError("attach_radius must be positive")
    return Mode.BACKTRACING if attach(area, goal, attach_radius) is not None else Mode.EXPLORATION


def _euclid_heuristic(positions: np.ndarray, goal_idx: int):
    g = positions[goal_idx]
    return lambda n: math.hypot(positions[n][0] - g[0], positions[n][1] - g[1])


def _path_plan(area, mode: Mode, path: list[int], cost: float, start, goal) -> Plan:
    pts = [tuple(map(float, area.positions[i])) for i in path]
    waypoints = list(pts)
    if goal is not None and (not waypoints or math.dist(waypoints[-1], goal) > 1e-12):
        waypoints.append((float(goal[0]), float(goal[1])))
    return Plan(mode, waypoints, list(path), float(cost), [area.key_of(i) for i in path])


def plan_backtracing(area, start, goal, attach_radius: float | None = None) -> Plan:
    """A* on the merged roadmap between the vertices ``start`` and ``goal`` attach to."""
    r = attach_radius if attach_radius is not None else area.merged_roadmap.sample_interval
    s = attach_start(area, start, r)
    g = attach(area, goal, r)
    if s is None or g is None:
        raise NoPath("start or goal does not attach to the local area")
    path, cost = astar(area.adjacency(), s, g, _euclid_heuristic(area.positions, g))
    return _path_plan(area, Mode.BACKTRACING, path, cost, start, goal)


# --------------------------------------------------------------------- utility


def frontier_utility(f, goal, state: PlannerState, w: CostWeights) -> float:
    d = math.hypot(f[0] - goal[0], f[1] - goal[1])
    if state.last_waypoint is None:
        return w.w_d * d
    lx, ly = state.last_waypoint
    return w.w_d * d + w.w_l * math.hypot(f[0] - lx, f[1] - ly)


def utilities(frontiers: np.ndarray, goal, last, w: CostWeights) -> np.ndarray:
    f = np.asarray(frontiers, dtype=float).reshape(-1, 2)
    u = w.w_d * np.hypot(f[:, 0] - goal[0], f[:, 1] - goal[1])
    if last is not None:
        u = u + w.w_l * np.hypot(f[:, 0] - last[0], f[:, 1] - last[1])
    return u


def select_waypoint(frontiers, goal, state: PlannerState, w: CostWeights, keys=None):
    """Frontier minimizing the utility; ties go to the lowest key (list order if
    no keys). Records the choice as the last waypoint."""
    if len(frontiers) == 0:
        raise NoFrontiers("no frontier left to explore")
    f = np.asarray(frontiers, dtype=float).reshape(-1, 2)
    u = utilities(f, goal, state.last_waypoint, w)
    if keys is None:
        k = np.arange(len(f))
        best = int(np.lexsort((k, u))[0])
    else:
        ka = np.asarray(keys, dtype=np.int64).reshape(len(f), -1)
        best = int(np.lexsort(tuple(ka[:, j] for j in range(ka.shape[1] - 1, -1, -1)) + (u,))[0])
    choice = (float(f[best, 0]), float(f[best, 1]))
    state.last_waypoint = choice
    if keys is not None:
        state.waypoint_key = tuple(int(x) for x in np.asarray(keys[best]).ravel())
    return choice


def _route_in_area(area, s: int, target: int) -> tuple[list[int], float]:
    return astar(area.adjacency(), s, target, _euclid_heuristic(area.positions, target))


def plan_exploration(topology, area, frontiers: list[FrontierEntry], start, goal,
                     state: PlannerState, w: CostWeights, current_id: int,
                     attach_radius: float | None = None) -> Plan:
    """Head for the global waypoint frontier, one local-area leg at a time.

    Frontiers that turn out unreachable are blacklisted in ``state`` and the
    selection is repeated.
    """
    r = attach_radius if attach_radius is not None else area.merged_roadmap.sample_interval
    s = attach_start(area, start, r)
    if s is None:
        raise NoPath("robot does not attach to the local area")
    members = set(area.member_submap_ids)
    while True:
        pool = [e for e in frontiers if e.key not in state.blacklist]
        if not pool:
            raise NoFrontiers("no reachable frontier left")
        # commit the last waypoint only once a route exists
        probe = PlannerState(state.goal, state.mode, state.last_waypoint)
        select_waypoint([e.position for e in pool], goal, probe, w, keys=[e.key for e in pool])
        entry = next(e for e in pool if e.key == probe.waypoint_key)
        try:
            plan = _explore_towards(topology, area, entry, s, current_id, members)
        except NoPath:
            state.blacklist.add(entry.key)
            continue
        state.last_waypoint = probe.last_waypoint
        state.waypoint_key = entry.key
        state.mode = Mode.EXPLORATION
        plan.target = entry.key
        return plan


def _explore_towards(topology, area, entry: FrontierEntry, s: int, current_id: int, members: set) -> Plan:
    if entry.submap_id in members:
        target = area.merged_index(entry.key)
        if target is None:
            raise NoPath("frontier vertex missing from the local area")
        path, cost = _route_in_area(area, s, target)
        if len(path) == 1:
            # standing on it; the next observation will clear it
            raise NoPath("already at frontier")
        plan = _path_plan(area, Mode.EXPLORATION, path, cost, None, None)
        plan.topology_path = [current_id]
        return plan
    topo_path, _ = topology.shortest_path(current_id, entry.submap_id)
    nxt = next(i for i in topo_path if i not in members)
    anchor = topology.nodes[nxt]
    # closest vertex to the next submap that the robot can actually reach
    from hitmap.search import dijkstra

    reach = dijkstra(area.adjacency(), s)
    idx = np.array(sorted(reach), dtype=np.int64)
    d = np.hypot(area.positions[idx, 0] - anchor.x, area.positions[idx, 1] - anchor.y)
    target = int(idx[np.lexsort((idx, d))[0]])
    if target == s:
        raise NoPath(f"submap {nxt} is not reachable from the local area")
    path, cost = _route_in_area(area, s, target)
    plan = _path_plan(area, Mode.EXPLORATION, path, cost, None, None)
    plan.topology_path = topo_path
    return plan


def plan_global_backtracing(topology, area, goal_owner: int, start, current_id: int,
                            attach_radius: float) -> Plan:
    """Goal is known but lies in a stored submap outside the local area: walk
    the topological route one local leg at a time."""
    s = attach_start(area, start, attach_radius)
    if s is None:
        raise NoPath("robot does not attach to the local area")
    members = set(area.member_submap_ids)
    entry = FrontierEntry(goal_owner, -1, (0.0, 0.0))
    plan = _explore_towards(topology, area, entry, s, current_id, members)
    plan.mode = Mode.BACKTRACING
    return plan
