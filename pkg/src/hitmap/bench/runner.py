"""Closed-loop mission runner: sense, map, plan, and follow, one scan per frame."""

from __future__ import annotations

import json
import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from hitmap.bench import metrics as M
from hitmap.bench.config import ScenarioConfig
from hitmap.bench.follower import Follower
from hitmap.errors import ConfigError, NoFrontiers, NoPath
from hitmap.geometry import Frame, Pose2
from hitmap.local_mapper import (
    LocalMetricMap, Roadmap, compute_traversability, detect_frontiers, inflate_obstacles, integrate_scan,
    reachable_region, robot_component, sample_roadmap,
)
from hitmap.planner import (
    Mode, PlannerState, frontier_index, plan_backtracing, plan_exploration,
    plan_global_backtracing, select_mode,
)
from hitmap.raycast import max_steps_for
from hitmap.submaps import (
    Submap, SubmapStore, clear_stale_frontiers, compose_local_area, maybe_spawn_submap, merge_local_into_submap,
    persist_demotions, segments_clear_union,
)
from hitmap.topology import (
    EdgeKind, GlobalTopology, LOOP_KINDS, add_sequential_edge, add_unchecked_loop,
    add_validated_loop, apply_correction, validate_loop,
)
from hitmap.world import World, detect_loop, ground_truth_relative, load_world, sense, step


class Outcome(str, Enum):
    REACHED = "Reached"
    TIMEOUT = "Timeout"
    STUCK = "Stuck"


EXIT_CODES = {Outcome.REACHED: 0, Outcome.TIMEOUT: 2, Outcome.STUCK: 3}


@dataclass
class RunResult:
    outcome: Outcome
    metrics: list
    final_map: dict
    frames: int
    events: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    # seconds per corrected submap, one entry per correction
    correction_times: list = field(default_factory=list)
    reason: str = ""
    replayed_history_cells: int = 0
    wall_time: float = 0.0

    @property
    def reintegration_cell_writes(self) -> int:
        return self.metrics[-1].reintegration_cell_writes if self.metrics else 0

    def summary(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "frames": self.frames,
            "reason": self.reason,
            "reintegration_cell_writes": self.reintegration_cell_writes,
            "loop_events": [e for e in self.events if e["kind"].startswith("loop")],
        }


class Watchdog:
    """Flags a robot whose true position has stayed within ``distance`` for ``window`` frames."""

    def __init__(self, window: int, distance: float):
        self.window = window
        self.distance = distance
        self._pts: deque = deque(maxlen=window)

    def update(self, x: float, y: float) -> bool:
        self._pts.append((x, y))
        if len(self._pts) < self.window:
            return False
        pts = np.asarray(self._pts)
        return bool(np.hypot(pts[:, 0] - x, pts[:, 1] - y).max() < self.distance)

    def reset(self) -> None:
        self._pts.clear()


def load_scenario_world(cfg: ScenarioConfig, world: World | None) -> World:
    if world is None:
        if not cfg.world:
            raise ConfigError("config names no world file")
        world = load_world(cfg.world)
    if not world.is_free_point(cfg.start[0], cfg.start[1]):
        raise ConfigError("start pose is not in free space")
    return world


def corrected_pose(submap: Submap, odom: Pose2) -> Pose2:
    """Robot estimate in the Corrected frame, carried through the submap it is mapping into."""
    shift = submap.anchor.compose(submap.creation_odom.with_frame(Frame.CORRECTED).inverse())
    return shift.compose(odom.with_frame(Frame.CORRECTED))


def _nearest_passable(grid, cell: tuple[int, int], reach_cells: int = 3) -> tuple[int, int] | None:
    r, c = cell
    n = grid.geometry.n
    if 0 <= r < n and 0 <= c < n and grid.passable[r, c]:
        return r, c
    r0, r1 = max(r - reach_cells, 0), min(r + reach_cells + 1, n)
    c0, c1 = max(c - reach_cells, 0), min(c + reach_cells + 1, n)
    if r0 >= r1 or c0 >= c1:
        return None
    rr, cc = np.nonzero(grid.passable[r0:r1, c0:c1])
    if len(rr) == 0:
        return None
    rr, cc = rr + r0, cc + c0
    d = (rr - r) ** 2 + (cc - c) ** 2
    k = np.lexsort((cc, rr, d))[0]
    return int(rr[k]), int(cc[k])


class HiTMapMission:
    """State of one HiTMap mission; ``step_frame`` advances it by one scan."""

    def __init__(self, cfg: ScenarioConfig, world: World | None = None):
        self.cfg = cfg
        self.world = load_scenario_world(cfg, world)
        self.sensor = cfg.sensor_model()
        self.drift = cfg.drift_model()
        self.true = cfg.start_pose()
        self.odom = self.true.with_frame(Frame.ODOMETRY)
        self.local_map = LocalMetricMap(cfg.map_size, cfg.resolution, cfg.snap_cells, center=self.odom)
        self.store = SubmapStore()
        self.topology = GlobalTopology()
        first = Submap.create(0, self.odom, cfg.sample_interval, cfg.resolution,
                              cfg.known_half_extent, true_anchor=self.true)
        self.store.add(first)
        self.topology.add_node(0, first.anchor)
        self.history = [(0, self.true)]
        self.current = first
        self.goals = cfg.goals()
        self.goal_idx = 0
        self.pstate = PlannerState(goal=self.goals[0])
        self.weights = cfg.weights()
        self.follower = Follower(cfg.max_speed, cfg.max_turn_rate, lookahead=max(2 * cfg.sample_interval, 0.5))
        self.watchdog = Watchdog(cfg.stuck_window, cfg.stuck_distance)
        self.reintegration_writes = 0
        self.events: list[dict] = []
        self.correction_times: list[float] = []
        self.trajectory = [(self.true.x, self.true.y)]
        self.area = None
        self.plan = None
        self.grid = None
        self._topo_sig = None
        self._ray_cells = self.sensor.n_beams * max_steps_for(self.sensor.max_range, cfg.resolution)

    # ------------------------------------------------------------- helpers

    def _cell_writes(self) -> int:
        return self.local_map.cell_writes + sum(sm.known.cell_writes for sm in self.store.values())

    def estimate(self) -> Pose2:
        return corrected_pose(self.current, self.odom)

    def _spawn(self, frame: int) -> None:
        cfg = self.cfg
        new = maybe_spawn_submap(self.odom, self.current, cfg.submap_interval,
                                 cfg.known_half_extent, true_anchor=self.true)
        if new is None:
            return
        # anchor at the corrected estimate so the new submap agrees with corrected neighbors
        new.anchor = self.estimate()
        self.store.add(new)
        self.topology.add_node(new.id, new.anchor)
        add_sequential_edge(self.topology, self.current.id, new.id)
        self.history.append((new.id, self.true))
        self.current = new
        self.events.append({"frame": frame, "kind": "spawn", "submap": new.id})

    def _handle_loop(self, frame: int) -> None:
        cur = self.current.id
        topo = self.topology
        exclude = set(topo.neighbors(cur))
        for (pair, epoch) in topo._rejected:
            if epoch == topo.epoch and cur in pair:
                exclude.add(pair[0] if pair[1] == cur else pair[1])
        cand = detect_loop(self.history, self.true, self.cfg.effective_loop_radius, exclude)
        if cand is None:
            return
        writes_before = self._cell_writes()
        if self.cfg.loop_validation:
            ok = validate_loop(topo, self.store, cand, cur, self.cfg.effective_connect_radius)
            if not ok:
                self.events.append({"frame": frame, "kind": "loop_rejected", "pair": [cand, cur]})
                return
            add_validated_loop(topo, cand, cur)
            kind = EdgeKind.VALIDATED_LOOP
        else:
            add_unchecked_loop(topo, cand, cur)
            kind = EdgeKind.UNCHECKED_LOOP
        self.events.append({"frame": frame, "kind": "loop_added", "pair": [cand, cur], "edge": kind.value})
        observed = ground_truth_relative(self.store.get(cand).true_anchor, self.store.get(cur).true_anchor)
        t0 = time.perf_counter()
        apply_correction(topo, self.store, (cand, cur), observed)
        dt = time.perf_counter() - t0
        moved = max(1, max(self.store.ids()) - min(cand, cur))
        self.correction_times.append(dt / moved)
        self.reintegration_writes += self._cell_writes() - writes_before

    def _goal_owner(self, goal, members) -> int | None:
        r = self.cfg.effective_attach_radius
        reach = self.cfg.known_half_extent * math.sqrt(2) + r
        g = np.asarray(goal, dtype=float)
        for sm in self.store.values():
            if sm.id in members or len(sm.roadmap) == 0:
                continue
            if math.hypot(sm.anchor.x - g[0], sm.anchor.y - g[1]) > reach:
                continue
            pts = sm.corrected_points()
            d = np.hypot(pts[:, 0] - g[0], pts[:, 1] - g[1])
            near = np.flatnonzero(d <= r + 1e-9)
            if len(near) == 0:
                continue
            clear = segments_clear_union(np.repeat(g[None], len(near), axis=0), pts[near], [sm])
            if clear.any():
                return sm.id
        return None

    def _plan(self, est: Pose2) -> tuple[object, str]:
        cfg = self.cfg
        r = cfg.effective_attach_radius
        goal = self.goals[self.goal_idx]
        start = (est.x, est.y)
        area = self.area
        sig = (len(self.topology.nodes), len(self.topology.edges), self.topology.epoch)
        if sig != self._topo_sig:
            self.pstate.blacklist.clear()
            self._topo_sig = sig
        if select_mode(area, goal, r) == Mode.BACKTRACING:
            try:
                self.pstate.mode = Mode.BACKTRACING
                return plan_backtracing(area, start, goal, r), ""
            except NoPath:
                pass
        owner = self._goal_owner(goal, set(area.member_submap_ids))
        if owner is not None:
            try:
                self.pstate.mode = Mode.BACKTRACING
                return plan_global_backtracing(self.topology, area, owner, start, self.current.id, r), ""
            except NoPath:
                pass
        try:
            return plan_exploration(self.topology, area, frontier_index(self.store), start, goal,
                                    self.pstate, self.weights, self.current.id, r), ""
        except NoFrontiers:
            return None, "no frontiers"
        except NoPath:
            return None, "robot not attached"

    # ---------------------------------------------------------------- frame

    def step_frame(self, frame: int) -> tuple[M.FrameMetrics, Outcome | None, str]:
        cfg = self.cfg
        lm = self.local_map
        scan = sense(self.world, self.true, self.sensor)
        integrate_scan(lm, scan, self.odom)
        grid = compute_traversability(lm, cfg.slope_threshold, cfg.roughness_threshold)
        grid = inflate_obstacles(grid, cfg.robot_radius)
        self.grid = grid
        roadmap = sample_roadmap(grid, cfg.sample_interval)
        rc = _nearest_passable(grid, lm.cell_of(self.odom.x, self.odom.y))
        if rc is not None:
            roadmap = detect_frontiers(lm, grid, roadmap, rc, cfg.min_frontier_cells)
            reach = reachable_region(grid, rc)
            roadmap = robot_component(roadmap, grid, rc)
        else:
            reach = np.zeros(grid.traversable.shape, dtype=bool)
            roadmap = Roadmap.empty(cfg.sample_interval)

        self.current.advance(self.odom)
        self._spawn(frame)
        # the window's verdict also applies to older submaps lying under it
        reach_m = cfg.known_half_extent + cfg.map_size
        for sm in self.store.values() if rc is not None else ():
            if sm is not self.current and sm.creation_odom.distance(self.odom) <= reach_m:
                clear_stale_frontiers(sm, grid, roadmap, cfg.dedup_epsilon)
        merge_local_into_submap(self.current, roadmap, self.odom, cfg.dedup_epsilon,
                                grid=grid if rc is not None else None)
        self.current.known.update(grid, reach)
        self._handle_loop(frame)

        self.area = compose_local_area(self.topology, self.store, self.current.id,
                                       cfg.effective_connect_radius, cfg.dedup_epsilon)
        persist_demotions(self.area, self.store)

        est = self.estimate()
        outcome = None
        reason = ""
        goal = self.goals[self.goal_idx]
        if math.dist((est.x, est.y), goal) <= cfg.effective_attach_radius:
            self.events.append({"frame": frame, "kind": "goal_reached", "goal": list(goal)})
            if self.goal_idx == len(self.goals) - 1:
                outcome = Outcome.REACHED
            else:
                self.goal_idx += 1
                self.pstate.goal = self.goals[self.goal_idx]
                goal = self.goals[self.goal_idx]

        cmd = (0.0, 0.0)
        mode = "Stopped"
        if outcome is None:
            plan, why = self._plan(est)
            self.plan = plan
            if plan is None and why == "no frontiers":
                outcome, reason = Outcome.STUCK, "no plan and no frontiers"
            elif plan is None:
                cmd = (0.0, cfg.max_turn_rate)
            else:
                mode = plan.mode.value
                final = plan.mode == Mode.BACKTRACING and self.goal_idx == len(self.goals) - 1
                cmd = self.follower.command(est.x, est.y, est.theta, plan.waypoints, cfg.dt, stop_at_end=final)

        collided = False
        if outcome is None:
            res = step(self.world, self.true, self.odom, cmd, cfg.dt, self.drift)
            self.true, self.odom, collided = res.true_pose, res.odom_pose, res.collided
            self.trajectory.append((self.true.x, self.true.y))
            if self.watchdog.update(self.true.x, self.true.y):
                outcome, reason = Outcome.STUCK, "no progress"

        rec = self._metrics(frame, mode, math.dist((est.x, est.y), goal), collided)
        return rec, outcome, reason

    def _metrics(self, frame: int, mode: str, dist: float, collided: bool) -> M.FrameMetrics:
        area = self.area
        lm_bytes = M.local_map_bytes(self.local_map)
        av, ae, acells = area.memory_items()
        active = lm_bytes + M.roadmap_bytes(av, ae) + acells * M.KNOWN_CELL_BYTES
        total = lm_bytes + sum(M.submap_bytes(sm) for sm in self.store.values()) + M.topology_bytes(self.topology)
        modeled = (M.SEC_PER_RAY_CELL * self._ray_cells
                   + M.SEC_PER_GRID_CELL * (4 * self.local_map.cell_count + acells)
                   + M.SEC_PER_VERTEX * av + M.SEC_PER_EDGE * ae)
        n_loops = sum(1 for e in self.topology.edges if e.kind in LOOP_KINDS)
        return M.FrameMetrics(
            frame_num=frame,
            active_memory_bytes=int(active),
            total_memory_bytes=int(total),
            frame_time=float(modeled),
            reintegration_cell_writes=int(self.reintegration_writes),
            mode=mode,
            distance_to_goal=float(dist),
            n_submaps=len(self.store),
            n_loop_edges=n_loops,
            collided=bool(collided),
        )

    def final_map(self) -> dict:
        return {
            "submaps": [sm.to_json() for sm in self.store.values()],
            "topology": self.topology.to_json(),
        }


def _finish_outputs(out_dir, mission_like, result: RunResult, render_fn) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    render_fn(out / "snapshot_final.png")


def run_scenario(cfg: ScenarioConfig, out_dir=None, world: World | None = None) -> RunResult:
    """Run one HiTMap mission until Reached, Stuck, or the frame budget runs out."""
    from hitmap.bench.render import render_mission

    wall0 = time.perf_counter()
    mission = HiTMapMission(cfg, world)
    out = Path(out_dir) if out_dir is not None else None
    writer = M.MetricsWriter(out / "metrics.jsonl" if out else None)
    timing = (out / "timing.jsonl").open("w") if out else None
    records = []
    outcome, reason = Outcome.TIMEOUT, "frame budget exhausted"
    frame = 0
    try:
        for frame in range(cfg.frames):
            t0 = time.perf_counter()
            rec, result, why = mission.step_frame(frame)
            elapsed = time.perf_counter() - t0
            records.append(rec)
            writer.write(rec.to_json())
            if timing is not None:
                timing.write(json.dumps({"frame_num": frame, "wall_time": elapsed}) + "\n")
            if out and cfg.snapshot_every and frame % cfg.snapshot_every == 0:
                render_mission(mission, out / f"snapshot_{frame:05d}.png")
            if result is not None:
                outcome, reason = result, why
                break
    finally:
        writer.close()
        if timing is not None:
            timing.close()
    res = RunResult(outcome, records, mission.final_map(), frame + 1, mission.events,
                    mission.trajectory, mission.correction_times, reason)
    res.wall_time = time.perf_counter() - wall0
    if out:
        mission.store.save(out / "map", mission.topology)
        (out / "topology.json").write_text(
            json.dumps(mission.topology.to_json(), sort_keys=True, separators=(",", ":")))
        if mission.plan is not None:
            (out / "plan.json").write_text(json.dumps(mission.plan.to_json(), sort_keys=True))
        _finish_outputs(out, mission, res, lambda p: render_mission(mission, p))
    res.mission = mission
    return res


def run_greedy(cfg: ScenarioConfig, world: World | None = None) -> RunResult:
    """Drive straight at each goal with no map at all."""
    world = load_scenario_world(cfg, world)
    drift = cfg.drift_model()
    true = cfg.start_pose()
    odom = true.with_frame(Frame.ODOMETRY)
    follower = Follower(cfg.max_speed, cfg.max_turn_rate)
    watchdog = Watchdog(cfg.stuck_window, cfg.stuck_distance)
    goals = cfg.goals()
    gi = 0
    records = []
    traj = [(true.x, true.y)]
    outcome, reason = Outcome.TIMEOUT, "frame budget exhausted"
    frame = 0
    for frame in range(cfg.frames):
        goal = goals[gi]
        d = math.dist((odom.x, odom.y), goal)
        if d <= cfg.effective_attach_radius:
            if gi == len(goals) - 1:
                outcome, reason = Outcome.REACHED, ""
                break
            gi += 1
            goal = goals[gi]
        cmd = follower.command(odom.x, odom.y, odom.theta, [goal], cfg.dt)
        res = step(world, true, odom, cmd, cfg.dt, drift)
        true, odom = res.true_pose, res.odom_pose
        traj.append((true.x, true.y))
        records.append(M.FrameMetrics(frame, 0, 0, 0.0, 0, "Greedy", float(d), collided=res.collided))
        if watchdog.update(true.x, true.y):
            outcome, reason = Outcome.STUCK, "no progress"
            break
    return RunResult(outcome, records, {}, frame + 1, [], traj, [], reason)
