"""Global-metric baseline: one growing world grid, re-integrated on every correction.

The robot keeps every scan it has taken. Scans are filed under keyframes laid
down every ``submap_interval`` meters; a loop moves keyframe anchors exactly as
in HiTMap, but here the moved scans no longer agree with the grid, so the grid
is wiped and the whole history is ray-traced again.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from hitmap.bench import metrics as M
from hitmap.bench.config import ScenarioConfig
from hitmap.bench.follower import Follower
from hitmap.bench.runner import Outcome, RunResult, Watchdog, load_scenario_world
from hitmap.geometry import Frame, Pose2
from hitmap.local_mapper import FREE, OBSTACLE, UNKNOWN, _known_gradient, accumulate, rasterize_scan
from hitmap.raycast import max_steps_for
from hitmap.topology import distribute_correction
from hitmap.world import RangeScan, World, detect_loop, ground_truth_relative, sense, step


@dataclass(eq=False)
class BaselineGlobalMap:
    """World-frame grid that grows in whole chunks and never shrinks."""

    resolution: float
    chunk: int = 32
    origin: tuple[int, int] = (0, 0)
    state: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.uint8))
    height_mean: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    height_m2: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    observation_count: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))

    _LAYERS = ("state", "height_mean", "height_m2", "observation_count")

    @property
    def shape(self) -> tuple[int, int]:
        return self.state.shape

    @property
    def cell_count(self) -> int:
        return int(self.state.size)

    def ensure(self, ix_lo: int, iy_lo: int, ix_hi: int, iy_hi: int) -> None:
        """Grow so global cells [ix_lo, ix_hi] x [iy_lo, iy_hi] are covered."""
        h, w = self.shape
        if h and w:
            ox, oy = self.origin
            if ix_lo >= ox and iy_lo >= oy and ix_hi < ox + w and iy_hi < oy + h:
                return
            ix_lo, iy_lo = min(ix_lo, ox), min(iy_lo, oy)
            ix_hi, iy_hi = max(ix_hi, ox + w - 1), max(iy_hi, oy + h - 1)
        k = self.chunk
        nx0, ny0 = (ix_lo // k) * k, (iy_lo // k) * k
        nx1, ny1 = (ix_hi // k + 1) * k, (iy_hi // k + 1) * k
        for name in self._LAYERS:
            old = getattr(self, name)
            new = np.zeros((ny1 - ny0, nx1 - nx0), dtype=old.dtype)
            if old.size:
                r0, c0 = self.origin[1] - ny0, self.origin[0] - nx0
                new[r0:r0 + old.shape[0], c0:c0 + old.shape[1]] = old
            setattr(self, name, new)
        self.origin = (nx0, ny0)

    def integrate(self, r) -> int:
        """Fold a rasterized scan in; returns the number of distinct cells written."""
        ix = np.concatenate([r.free_ix, r.hit_ix])
        iy = np.concatenate([r.free_iy, r.hit_iy])
        if len(ix) == 0:
            return 0
        self.ensure(int(ix.min()), int(iy.min()), int(ix.max()), int(iy.max()))
        w = self.shape[1]
        ox, oy = self.origin
        free_flat = (r.free_iy - oy) * w + (r.free_ix - ox)
        hit_flat = (r.hit_iy - oy) * w + (r.hit_ix - ox)
        return accumulate(self.state.reshape(-1), self.height_mean.reshape(-1), self.height_m2.reshape(-1),
                          self.observation_count.reshape(-1), free_flat, r.heights, hit_flat)

    def clear(self) -> None:
        """Forget every observation but keep the allocation."""
        for name in self._LAYERS:
            getattr(self, name)[...] = 0

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of a world point; may lie outside the grid."""
        return (int(math.floor(y / self.resolution)) - self.origin[1],
                int(math.floor(x / self.resolution)) - self.origin[0])

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return ((self.origin[0] + col + 0.5) * self.resolution,
                (self.origin[1] + row + 0.5) * self.resolution)

    def blocked(self, robot_radius: float, slope_threshold: float, roughness_threshold: float) -> np.ndarray:
        """Cells the robot center may not enter; unknown counts as free."""
        known = self.state == FREE
        res = self.resolution
        gy = _known_gradient(self.height_mean, known, res, axis=0)
        gx = _known_gradient(self.height_mean, known, res, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(self.observation_count > 0,
                           self.height_m2 / np.maximum(self.observation_count, 1), 0.0)
        rough = known & ((np.hypot(gx, gy) > slope_threshold) | (var > roughness_threshold))
        hard = (self.state == OBSTACLE) | rough
        if not hard.any() or robot_radius <= 0:
            return hard
        return ndimage.distance_transform_edt(~hard) <= robot_radius / res + 1e-9


def distinct_cells(r) -> int:
    """Cells one rasterized scan touches, counted independently of the grid."""
    cells = np.concatenate([np.stack([r.free_ix, r.free_iy], axis=1),
                            np.stack([r.hit_ix, r.hit_iy], axis=1)])
    return len(np.unique(cells, axis=0)) if len(cells) else 0


def replay_size(scans, poses, resolution: float) -> int:
    """Cells a full replay writes: distinct cells per scan, summed."""
    return sum(distinct_cells(rasterize_scan(scan, pose, resolution)) for scan, pose in zip(scans, poses))


_STEPS = ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)))


def grid_path(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int],
              resolution: float) -> tuple[list[tuple[int, int]], float]:
    """8-connected shortest path over unblocked cells; ([], inf) when none exists."""
    h, w = blocked.shape
    free = ~blocked
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, vals = [], [], []
    for dr, dc, cost in _STEPS:
        r0, r1 = max(0, -dr), h - max(0, dr)
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = free[r0:r1, c0:c1] & free[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        if dr and dc:
            # no corner cutting past a blocked cell
            a &= free[r0 + dr:r1 + dr, c0:c1] & free[r0:r1, c0 + dc:c1 + dc]
        src = idx[r0:r1, c0:c1][a]
        dst = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc][a]
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(len(src), cost * resolution))
    g = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(h * w, h * w)).tocsr()
    s = start[0] * w + start[1]
    t = goal[0] * w + goal[1]
    dist, pred = dijkstra(g, directed=False, indices=s, return_predecessors=True)
    if not np.isfinite(dist[t]):
        return [], math.inf
    path = [t]
    while path[-1] != s:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return [(p // w, p % w) for p in path], float(dist[t])


@dataclass
class _Keyframe:
    id: int
    anchor: Pose2
    creation_odom: Pose2
    true_anchor: Pose2


class BaselineMission:
    """Same sense/drift/follow loop as HiTMap, mapping into one global grid."""

    def __init__(self, cfg: ScenarioConfig, world: World | None = None, replan_every: int = 5,
                 margin: float = 2.0):
        self.cfg = cfg
        self.world = load_scenario_world(cfg, world)
        self.sensor = cfg.sensor_model()
        self.drift = cfg.drift_model()
        self.true = cfg.start_pose()
        self.odom = self.true.with_frame(Frame.ODOMETRY)
        self.map = BaselineGlobalMap(cfg.resolution)
        self.keyframes = [_Keyframe(0, self.true.with_frame(Frame.CORRECTED), self.odom, self.true)]
        self.history = [(0, self.true)]
        self.closed: set = set()
        self.scans: list[tuple[int, Pose2, RangeScan]] = []
        self.traveled = 0.0
        self.goals = cfg.goals()
        self.goal_idx = 0
        self.follower = Follower(cfg.max_speed, cfg.max_turn_rate, lookahead=max(2 * cfg.sample_interval, 0.5))
        self.watchdog = Watchdog(cfg.stuck_window, cfg.stuck_distance)
        self.replan_every = replan_every
        self.margin = margin
        self.path: list[tuple[float, float]] = []
        self.reintegration_writes = 0
        self.replayed_history_cells = 0
        self.events: list[dict] = []
        self.trajectory = [(self.true.x, self.true.y)]
        self._ray_cells = self.sensor.n_beams * max_steps_for(self.sensor.max_range, cfg.resolution)
        self._scan_bytes = M.scan_bytes(self.sensor.n_beams)

    def _pose_of(self, kf_id: int, odom: Pose2) -> Pose2:
        kf = self.keyframes[kf_id]
        shift = kf.anchor.compose(kf.creation_odom.with_frame(Frame.CORRECTED).inverse())
        return shift.compose(odom.with_frame(Frame.CORRECTED))

    def estimate(self) -> Pose2:
        return self._pose_of(self.keyframes[-1].id, self.odom)

    def _replay(self) -> None:
        """Wipe the grid and ray-trace every stored scan at its corrected pose."""
        self.map.clear()
        poses = [self._pose_of(k, o) for k, o, _ in self.scans]
        expected = 0
        written = 0
        for (_, _, scan), pose in zip(self.scans, poses):
            r = rasterize_scan(scan, pose, self.map.resolution)
            expected += distinct_cells(r)
            written += self.map.integrate(r)
        self.replayed_history_cells += expected
        self.reintegration_writes += written

    def _keyframe(self, frame: int) -> None:
        if self.traveled < self.cfg.submap_interval:
            return
        kf = _Keyframe(len(self.keyframes), self.estimate(), self.odom, self.true)
        self.keyframes.append(kf)
        self.history.append((kf.id, self.true))
        self.traveled = 0.0
        self.events.append({"frame": frame, "kind": "spawn", "submap": kf.id})

    def _loop(self, frame: int) -> None:
        cur = self.keyframes[-1].id
        exclude = {a if b == cur else b for a, b in self.closed if cur in (a, b)}
        cand = detect_loop(self.history, self.true, self.cfg.effective_loop_radius, exclude)
        if cand is None:
            return
        self.closed.add((cand, cur))
        observed = ground_truth_relative(self.keyframes[cand].true_anchor, self.keyframes[cur].true_anchor)
        anchors = distribute_correction({k.id: k.anchor for k in self.keyframes}, cand, cur, observed)
        for k in self.keyframes:
            k.anchor = anchors[k.id]
        self._replay()
        self.events.append({"frame": frame, "kind": "loop_added", "pair": [cand, cur], "edge": "Baseline"})

    def _plan(self, est: Pose2, goal) -> bool:
        cfg = self.cfg
        res = self.map.resolution
        m = int(math.ceil(self.margin / res))
        pts = np.array([[est.x, est.y], goal])
        ix = np.floor(pts[:, 0] / res).astype(int)
        iy = np.floor(pts[:, 1] / res).astype(int)
        self.map.ensure(int(ix.min()) - m, int(iy.min()) - m, int(ix.max()) + m, int(iy.max()) + m)
        blocked = self.map.blocked(cfg.robot_radius, cfg.slope_threshold, cfg.roughness_threshold)
        start = self.map.cell_of(est.x, est.y)
        target = self.map.cell_of(*goal)
        if blocked[start]:
            # inflation can swallow the robot's own cell; leave from the nearest open one
            rr, cc = np.nonzero(~blocked)
            if len(rr) == 0:
                return False
            d = (rr - start[0]) ** 2 + (cc - start[1]) ** 2
            k = np.lexsort((cc, rr, d))[0]
            start = (int(rr[k]), int(cc[k]))
        blocked[target] = False
        cells, _ = grid_path(blocked, start, target, res)
        if not cells:
            return False
        self.path = [self.map.cell_center(r, c) for r, c in cells]
        self.path[-1] = (float(goal[0]), float(goal[1]))
        return True

    def step_frame(self, frame: int) -> tuple[M.FrameMetrics, Outcome | None, str]:
        cfg = self.cfg
        scan = sense(self.world, self.true, self.sensor)
        kf = self.keyframes[-1].id
        self.scans.append((kf, self.odom, scan))
        est = self.estimate()
        self.map.integrate(rasterize_scan(scan, est, self.map.resolution))
        self._keyframe(frame)
        self._loop(frame)

        est = self.estimate()
        goal = self.goals[self.goal_idx]
        outcome, reason = None, ""
        if math.dist((est.x, est.y), goal) <= cfg.effective_attach_radius:
            self.events.append({"frame": frame, "kind": "goal_reached", "goal": list(goal)})
            if self.goal_idx == len(self.goals) - 1:
                outcome = Outcome.REACHED
            else:
                self.goal_idx += 1
                goal = self.goals[self.goal_idx]
                self.path = []

        cmd = (0.0, 0.0)
        planned_cells = 0
        if outcome is None:
            if not self.path or frame % self.replan_every == 0:
                planned_cells = self.map.cell_count
                if not self._plan(est, goal):
                    outcome, reason = Outcome.STUCK, "no path on the optimistic grid"
            if outcome is None:
                final = self.goal_idx == len(self.goals) - 1
                cmd = self.follower.command(est.x, est.y, est.theta, self.path, cfg.dt, stop_at_end=final)

        collided = False
        if outcome is None:
            res = step(self.world, self.true, self.odom, cmd, cfg.dt, self.drift)
            self.true, self.odom, collided = res.true_pose, res.odom_pose, res.collided
            self.traveled += res.distance
            self.trajectory.append((self.true.x, self.true.y))
            if self.watchdog.update(self.true.x, self.true.y):
                outcome, reason = Outcome.STUCK, "no progress"

        mem = (self.map.cell_count * M.CELL_BYTES + len(self.scans) * self._scan_bytes
               + len(self.keyframes) * M.POSE_BYTES * 2)
        modeled = M.SEC_PER_RAY_CELL * self._ray_cells + M.SEC_PER_GRID_CELL * 4 * planned_cells
        rec = M.FrameMetrics(
            frame_num=frame,
            active_memory_bytes=int(mem),
            total_memory_bytes=int(mem),
            frame_time=float(modeled),
            reintegration_cell_writes=int(self.reintegration_writes),
            mode="Baseline",
            distance_to_goal=float(math.dist((est.x, est.y), goal)),
            n_submaps=len(self.keyframes),
            n_loop_edges=len(self.closed),
            collided=bool(collided),
        )
        return rec, outcome, reason

    def render(self, path) -> Path:
        from hitmap.bench.render import MapSnapshot, image_size, render_snapshot, world_bounds

        rows, cols = np.nonzero(self.map.state != UNKNOWN)
        res = self.map.resolution
        pts = np.stack([(self.map.origin[0] + cols + 0.5) * res, (self.map.origin[1] + rows + 0.5) * res], axis=1)
        vals = self.map.state[rows, cols]
        est = self.estimate()
        bounds = world_bounds(self.world)
        snap = MapSnapshot(bounds, traversable_pts=pts[vals == FREE], obstacle_pts=pts[vals == OBSTACLE],
                           robot=(est.x, est.y))
        plan = _PathPlan(self.path) if self.path else None
        return render_snapshot(snap, plan, path, size=image_size(bounds))


@dataclass
class _PathPlan:
    waypoints: list


def run_baseline(cfg: ScenarioConfig, out_dir=None, world: World | None = None) -> RunResult:
    """Run the global-grid baseline on the same mission as ``run_scenario``."""
    wall0 = time.perf_counter()
    mission = BaselineMission(cfg, world)
    out = Path(out_dir) if out_dir is not None else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
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
                mission.render(out / f"snapshot_{frame:05d}.png")
            if result is not None:
                outcome, reason = result, why
                break
    finally:
        writer.close()
        if timing is not None:
            timing.close()
    res = RunResult(outcome, records, {"cells": mission.map.cell_count, "scans": len(mission.scans)},
                    frame + 1, mission.events, mission.trajectory, [], reason,
                    replayed_history_cells=mission.replayed_history_cells)
    res.wall_time = time.perf_counter() - wall0
    if out:
        summary = res.summary()
        summary["replayed_history_cells"] = res.replayed_history_cells
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        mission.render(out / "snapshot_final.png")
    res.mission = mission
    return res
