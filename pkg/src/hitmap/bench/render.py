"""Static PNG snapshots of the hierarchical map."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from hitmap.submaps import KNOWN_BLOCKED, KNOWN_TRAVERSABLE

BACKGROUND = (255, 255, 255)
OBSTACLE = (40, 40, 40)
TRAVERSABLE = (205, 230, 205)
ROADMAP = (120, 120, 200)
GLOBAL_EDGE = (30, 160, 60)
LOOP_EDGE = (220, 120, 0)
FRONTIER = (200, 30, 30)
PLAN = (230, 0, 200)
ROBOT = (0, 0, 0)


@dataclass
class MapSnapshot:
    """Everything a snapshot draws, already in world coordinates (meters)."""

    bounds: tuple[float, float, float, float]
    traversable_pts: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    obstacle_pts: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    roadmap_segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    global_segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    loop_segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    frontier_pts: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    robot: tuple[float, float] | None = None


def snapshot_from_map(store, topology, bounds, robot=None) -> MapSnapshot:
    from hitmap.topology import LOOP_KINDS

    trav, obst, segs, front = [], [], [], []
    for sm in store.values():
        k = sm.known
        rows, cols = np.nonzero(k.data)
        if len(rows):
            centers = np.stack([(k.origin[0] + cols + 0.5) * k.resolution,
                                (k.origin[1] + rows + 0.5) * k.resolution], axis=1)
            corrected = sm.anchor.transform_points(sm.odom_to_local(centers))
            vals = k.data[rows, cols]
            trav.append(corrected[vals == KNOWN_TRAVERSABLE])
            obst.append(corrected[vals == KNOWN_BLOCKED])
        rm = sm.roadmap
        if len(rm):
            pts = sm.corrected_points()
            if rm.n_edges:
                idx = rm.index_of()
                a = pts[[idx[int(e)] for e in rm.edges[:, 0]]]
                b = pts[[idx[int(e)] for e in rm.edges[:, 1]]]
                segs.append(np.hstack([a, b]))
            front.append(pts[rm.is_frontier])
    glob, loops = [], []
    for e in topology.edges:
        pa, pb = topology.nodes[e.a], topology.nodes[e.b]
        (loops if e.kind in LOOP_KINDS else glob).append([pa.x, pa.y, pb.x, pb.y])

    def cat(parts, width):
        parts = [p for p in parts if len(p)]
        return np.concatenate(parts) if parts else np.zeros((0, width))

    return MapSnapshot(
        bounds=tuple(bounds),
        traversable_pts=cat(trav, 2),
        obstacle_pts=cat(obst, 2),
        roadmap_segments=cat(segs, 4),
        global_segments=np.array(glob, dtype=float).reshape(-1, 4),
        loop_segments=np.array(loops, dtype=float).reshape(-1, 4),
        frontier_pts=cat(front, 2),
        robot=robot,
    )


def render_snapshot(snapshot: MapSnapshot | None, plan, path, size: tuple[int, int] = (400, 400),
                    bounds=None) -> Path:
    """Write a PNG; the plan polyline is drawn only when ``plan`` is given."""
    w, h = size
    img = Image.new("RGB", (w, h), BACKGROUND)
    if snapshot is not None or plan is not None:
        b = snapshot.bounds if snapshot is not None else bounds
        if b is None:
            raise ValueError("bounds are needed to draw a plan without a map")
        x0, y0, x1, y1 = b
        sx = w / max(x1 - x0, 1e-9)
        sy = h / max(y1 - y0, 1e-9)
        s = min(sx, sy)

        def px(pts):
            pts = np.asarray(pts, dtype=float).reshape(-1, 2)
            u = (pts[:, 0] - x0) * s
            v = h - 1 - (pts[:, 1] - y0) * s
            return np.stack([u, v], axis=1)

        draw = ImageDraw.Draw(img)
        if snapshot is not None:
            for pts, color in ((snapshot.traversable_pts, TRAVERSABLE), (snapshot.obstacle_pts, OBSTACLE)):
                if len(pts):
                    uv = np.round(px(pts)).astype(int)
                    ok = (uv[:, 0] >= 0) & (uv[:, 0] < w) & (uv[:, 1] >= 0) & (uv[:, 1] < h)
                    arr = np.asarray(img)
                    arr = arr.copy()
                    arr[uv[ok, 1], uv[ok, 0]] = color
                    img = Image.fromarray(arr)
                    draw = ImageDraw.Draw(img)
            for segs, color, width in ((snapshot.roadmap_segments, ROADMAP, 1),
                                       (snapshot.global_segments, GLOBAL_EDGE, 2),
                                       (snapshot.loop_segments, LOOP_EDGE, 2)):
                for seg in segs:
                    a, c = px(seg[:2])[0], px(seg[2:])[0]
                    draw.line([tuple(a), tuple(c)], fill=color, width=width)
            for p in px(snapshot.frontier_pts):
                draw.rectangle([p[0] - 1, p[1] - 1, p[0] + 1, p[1] + 1], fill=FRONTIER)
            if snapshot.robot is not None:
                p = px(snapshot.robot)[0]
                draw.ellipse([p[0] - 3, p[1] - 3, p[0] + 3, p[1] + 3], outline=ROBOT, width=2)
        if plan is not None and len(plan.waypoints):
            line = [tuple(p) for p in px(plan.waypoints)]
            if len(line) == 1:
                p = line[0]
                draw.ellipse([p[0] - 2, p[1] - 2, p[0] + 2, p[1] + 2], fill=PLAN)
            else:
                draw.line(line, fill=PLAN, width=2)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    img.save(out, format="PNG", optimize=False)
    return out


def world_bounds(world) -> tuple[float, float, float, float]:
    wx, wy = world.size
    return 0.0, 0.0, wx, wy


def image_size(bounds, px_per_meter: float = 20.0, max_side: int = 800) -> tuple[int, int]:
    x0, y0, x1, y1 = bounds
    scale = min(px_per_meter, max_side / max(x1 - x0, y1 - y0))
    return max(1, int(round((x1 - x0) * scale))), max(1, int(round((y1 - y0) * scale)))


def render_mission(mission, path) -> Path:
    bounds = world_bounds(mission.world)
    est = mission.estimate()
    snap = snapshot_from_map(mission.store, mission.topology, bounds, robot=(est.x, est.y))
    return render_snapshot(snap, mission.plan, path, size=image_size(bounds))
