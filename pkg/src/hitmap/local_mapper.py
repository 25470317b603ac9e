"""Robot-centric local metric map and the sparse roadmap sampled from it.

The window is axis-aligned in the odometry frame and always centered on a
cell whose global index is a multiple of ``snap_cells``; with ``snap_cells``
equal to the roadmap pitch, lattice points land on the same odometry
coordinates frame after frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from hitmap.errors import FrameMismatch, RobotCellNotTraversable
from hitmap.geometry import Frame, Pose2
from hitmap.raycast import traverse
from hitmap.world import RangeScan

UNKNOWN = 0
FREE = 1
OBSTACLE = 2

LOCAL = 0
INCREMENTAL = 1

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class GridGeometry:
    """Square window of ``n`` cells; ``origin`` is the global index (ix, iy) of cell [0, 0]."""

    resolution: float
    n: int
    origin: tuple[int, int]

    @property
    def center_cell(self) -> tuple[int, int]:
        """Local (row, col) of the window center."""
        return self.n // 2, self.n // 2

    def cell_centers(self, rows, cols) -> np.ndarray:
        x = (self.origin[0] + np.asarray(cols) + 0.5) * self.resolution
        y = (self.origin[1] + np.asarray(rows) + 0.5) * self.resolution
        return np.stack([x, y], axis=-1)

    def center_xy(self) -> np.ndarray:
        r, c = self.center_cell
        return self.cell_centers(r, c)

    def local_index(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of points; may fall outside the window."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        cols = np.floor(pts[:, 0] / self.resolution).astype(np.int64) - self.origin[0]
        rows = np.floor(pts[:, 1] / self.resolution).astype(np.int64) - self.origin[1]
        return rows, cols

    def inside(self, rows, cols) -> np.ndarray:
        return (rows >= 0) & (rows < self.n) & (cols >= 0) & (cols < self.n)

    def bounds(self) -> tuple[float, float, float, float]:
        x0 = self.origin[0] * self.resolution
        y0 = self.origin[1] * self.resolution
        side = self.n * self.resolution
        return x0, y0, x0 + side, y0 + side


@dataclass(eq=False)
class LocalMetricMap:
    side_length: float = 5.0
    resolution: float = 0.1
    snap_cells: int = 1
    frame: Frame = Frame.ODOMETRY
    center: Pose2 | None = None
    geometry: GridGeometry = field(init=False)
    state: np.ndarray = field(init=False)
    height_mean: np.ndarray = field(init=False)
    height_m2: np.ndarray = field(init=False)
    observation_count: np.ndarray = field(init=False)
    cell_writes: int = field(default=0, init=False)

    def __post_init__(self):
        n = int(round(self.side_length / self.resolution))
        if n <= 0:
            raise ValueError("side_length must cover at least one cell")
        self.geometry = GridGeometry(self.resolution, n, (-(n // 2), -(n // 2)))
        self.state = np.zeros((n, n), dtype=np.uint8)
        self.height_mean = np.zeros((n, n))
        self.height_m2 = np.zeros((n, n))
        self.observation_count = np.zeros((n, n), dtype=np.int64)
        if self.center is None:
            self.center = Pose2(0.0, 0.0, 0.0, self.frame)
        self.recenter(self.center)

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def cell_count(self) -> int:
        return self.n * self.n

    @property
    def height_var(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(self.observation_count > 0, self.height_m2 / np.maximum(self.observation_count, 1), 0.0)
        return np.maximum(var, 0.0)

    def recenter(self, pose: Pose2) -> None:
        """Slide the window so its center cell is the snapped cell under ``pose``."""
        if pose.frame != self.frame:
            raise FrameMismatch(f"map is {self.frame.value}, pose is {pose.frame.value}")
        res, n, k = self.resolution, self.n, self.snap_cells
        cx = int(math.floor(pose.x / res))
        cy = int(math.floor(pose.y / res))
        cx = k * int(round(cx / k))
        cy = k * int(round(cy / k))
        new_origin = (cx - n // 2, cy - n // 2)
        old_origin = self.geometry.origin
        self.center = pose
        if new_origin == old_origin:
            return
        dx = new_origin[0] - old_origin[0]
        dy = new_origin[1] - old_origin[1]
        self.geometry = GridGeometry(res, n, new_origin)
        for name in ("state", "height_mean", "height_m2", "observation_count"):
            old = getattr(self, name)
            new = np.zeros_like(old)
            if abs(dx) < n and abs(dy) < n:
                src_r = slice(max(dy, 0), n + min(dy, 0))
                src_c = slice(max(dx, 0), n + min(dx, 0))
                dst_r = slice(max(-dy, 0), n + min(-dy, 0))
                dst_c = slice(max(-dx, 0), n + min(-dx, 0))
                new[dst_r, dst_c] = old[src_r, src_c]
            setattr(self, name, new)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        rows, cols = self.geometry.local_index(np.array([[x, y]]))
        return int(rows[0]), int(cols[0])


@dataclass
class RasterizedScan:
    """Global cell indices a scan writes: free cells (with sampled heights) and hit cells."""

    free_ix: np.ndarray
    free_iy: np.ndarray
    heights: np.ndarray
    hit_ix: np.ndarray
    hit_iy: np.ndarray


def rasterize_scan(scan: RangeScan, pose: Pose2, resolution: float) -> RasterizedScan:
    """Cells along each beam before its hit become free; the struck cell is the hit."""
    angles = pose.theta + np.asarray(scan.bearings)
    ranges = np.asarray(scan.ranges, dtype=float)
    hits = np.asarray(scan.hits, dtype=bool)
    tr = traverse((pose.x, pose.y), angles, scan.max_range, resolution)

    # endpoint nudged past the hit face so it lands inside the struck cell
    ex = pose.x + np.cos(angles) * (ranges + 1e-6)
    ey = pose.y + np.sin(angles) * (ranges + 1e-6)
    hit_ix = np.floor(ex / resolution).astype(np.int64)
    hit_iy = np.floor(ey / resolution).astype(np.int64)

    free = tr.t_entry < ranges[:, None]
    free &= ~((tr.ix == hit_ix[:, None]) & (tr.iy == hit_iy[:, None]) & hits[:, None])

    if scan.heights is not None and scan.height_step > 0:
        mid = 0.5 * (tr.t_entry + np.minimum(tr.t_exit, ranges[:, None]))
        k = np.clip((mid / scan.height_step).astype(np.int64), 0, scan.heights.shape[1] - 1)
        hvals = np.take_along_axis(scan.heights, k, axis=1)[free]
    else:
        hvals = np.zeros(int(free.sum()))
    return RasterizedScan(tr.ix[free], tr.iy[free], hvals, hit_ix[hits], hit_iy[hits])


def accumulate(state: np.ndarray, mean: np.ndarray, m2: np.ndarray, count: np.ndarray,
               free_flat: np.ndarray, hvals: np.ndarray, hit_flat: np.ndarray) -> int:
    """Fold one scan into flat cell arrays (views, updated in place); returns the
    number of distinct cells written."""
    size = state.size
    nb = np.bincount(free_flat, minlength=size).astype(np.int64)
    touched = nb > 0
    if touched.any():
        s1 = np.bincount(free_flat, weights=hvals, minlength=size)
        s2 = np.bincount(free_flat, weights=hvals * hvals, minlength=size)
        t = np.flatnonzero(touched)
        nb_t = nb[t]
        # batched Chan/Welford combine
        mean_b = s1[t] / nb_t
        m2_b = np.maximum(s2[t] - nb_t * mean_b * mean_b, 0.0)
        na = count[t]
        tot = na + nb_t
        delta = mean_b - mean[t]
        mean[t] = mean[t] + delta * nb_t / tot
        m2[t] = m2[t] + m2_b + delta * delta * na * nb_t / tot
        count[t] = tot
        # obstacles are sticky
        state[t] = np.where(state[t] == OBSTACLE, OBSTACLE, FREE)
    if hit_flat.size:
        hb = np.bincount(hit_flat, minlength=size)
        h = np.flatnonzero(hb)
        count[h] += hb[h]
        state[h] = OBSTACLE
        touched[h] = True
    return int(touched.sum())


def integrate_scan(local_map: LocalMetricMap, scan: RangeScan, odom_pose: Pose2) -> LocalMetricMap:
    """Recenter on ``odom_pose`` and ray-trace the scan into the window (in place)."""
    if odom_pose.frame != local_map.frame:
        raise FrameMismatch(f"map is {local_map.frame.value}, pose is {odom_pose.frame.value}")
    local_map.recenter(odom_pose)
    if len(scan) == 0:
        return local_map
    geo = local_map.geometry
    r = rasterize_scan(scan, odom_pose, geo.resolution)
    n = geo.n
    rows, cols = r.free_iy - geo.origin[1], r.free_ix - geo.origin[0]
    ok = geo.inside(rows, cols)
    free_flat = (rows * n + cols)[ok]
    hvals = r.heights[ok]
    h_rows, h_cols = r.hit_iy - geo.origin[1], r.hit_ix - geo.origin[0]
    h_ok = geo.inside(h_rows, h_cols)
    hit_flat = (h_rows * n + h_cols)[h_ok]
    local_map.cell_writes += accumulate(
        local_map.state.reshape(-1), local_map.height_mean.reshape(-1), local_map.height_m2.reshape(-1),
        local_map.observation_count.reshape(-1), free_flat, hvals, hit_flat,
    )
    return local_map


# -------------------------------------------------------------- traversability


@dataclass(eq=False)
class TraversabilityGrid:
    geometry: GridGeometry
    state: np.ndarray
    slope: np.ndarray
    roughness: np.ndarray
    traversable: np.ndarray
    inflated: np.ndarray
    # traversable before inflation; the domain frontier search floods
    passable: np.ndarray
    # cells within the robot radius of a known obstacle
    near_obstacle: np.ndarray

    @property
    def cell_count(self) -> int:
        return self.geometry.n * self.geometry.n

    def is_traversable_at(self, pts) -> np.ndarray:
        rows, cols = self.geometry.local_index(pts)
        ok = self.geometry.inside(rows, cols)
        out = np.zeros(rows.shape, dtype=bool)
        out[ok] = self.traversable[rows[ok], cols[ok]]
        return out


def _known_gradient(h: np.ndarray, known: np.ndarray, res: float, axis: int) -> np.ndarray:
    """Central difference where both neighbors are known, one-sided otherwise."""
    hp = np.roll(h, -1, axis=axis)
    hm = np.roll(h, 1, axis=axis)
    kp = np.roll(known, -1, axis=axis)
    km = np.roll(known, 1, axis=axis)
    edge_p = [slice(None)] * 2
    edge_m = [slice(None)] * 2
    edge_p[axis] = -1
    edge_m[axis] = 0
    kp[tuple(edge_p)] = False
    km[tuple(edge_m)] = False
    g = np.zeros_like(h)
    both = known & kp & km
    g[both] = (hp[both] - hm[both]) / (2.0 * res)
    only_p = known & kp & ~km
    g[only_p] = (hp[only_p] - h[only_p]) / res
    only_m = known & km & ~kp
    g[only_m] = (h[only_m] - hm[only_m]) / res
    return g


def compute_traversability(local_map: LocalMetricMap, slope_threshold: float = 0.3,
                           roughness_threshold: float = 0.01) -> TraversabilityGrid:
    if slope_threshold <= 0 or roughness_threshold <= 0:
        raise ValueError("thresholds must be positive")
    res = local_map.resolution
    known = local_map.state == FREE
    h = local_map.height_mean
    gy = _known_gradient(h, known, res, axis=0)
    gx = _known_gradient(h, known, res, axis=1)
    slope = np.hypot(gx, gy)
    rough = local_map.height_var
    trav = known & (slope <= slope_threshold) & (rough <= roughness_threshold)
    n = local_map.n
    return TraversabilityGrid(
        geometry=local_map.geometry,
        state=local_map.state.copy(),
        slope=slope,
        roughness=rough,
        traversable=trav,
        inflated=np.zeros((n, n), dtype=bool),
        passable=trav.copy(),
        near_obstacle=np.zeros((n, n), dtype=bool),
    )


def _within(sources: np.ndarray, radius_cells: float) -> np.ndarray:
    if not sources.any():
        return np.zeros(sources.shape, dtype=bool)
    dist = ndimage.distance_transform_edt(~sources)
    return dist <= radius_cells + 1e-9


def inflate_obstacles(grid: TraversabilityGrid, robot_radius: float) -> TraversabilityGrid:
    """Block traversable cells whose center lies within ``robot_radius`` of an
    obstacle or unknown cell center."""
    if robot_radius < 0:
        raise ValueError("robot_radius must be non-negative")
    if robot_radius == 0:
        return grid
    rc = robot_radius / grid.geometry.resolution
    obstacle = grid.state == OBSTACLE
    near_any = _within(obstacle | (grid.state == UNKNOWN), rc)
    near_obs = _within(obstacle, rc)
    newly = grid.traversable & near_any
    return replace(
        grid,
        traversable=grid.traversable & ~newly,
        inflated=grid.inflated | newly,
        near_obstacle=grid.near_obstacle | near_obs,
    )


# --------------------------------------------------------------------- roadmap


@dataclass(eq=False)
class Roadmap:
    ids: np.ndarray
    positions: np.ndarray
    is_frontier: np.ndarray
    frontier_origin: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    sample_interval: float
    # set by detect_frontiers: boolean mask over the grid it ran on
    frontier_cells: np.ndarray | None = None

    @classmethod
    def empty(cls, sample_interval: float) -> Roadmap:
        return cls(
            np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros(0, dtype=bool),
            np.zeros(0, dtype=np.int8), np.zeros((0, 2), dtype=np.int64), np.zeros(0),
            sample_interval,
        )

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index_of(self) -> dict[int, int]:
        return {int(v): i for i, v in enumerate(self.ids)}

    def copy(self) -> Roadmap:
        return Roadmap(
            self.ids.copy(), self.positions.copy(), self.is_frontier.copy(),
            self.frontier_origin.copy(), self.edges.copy(), self.lengths.copy(),
            self.sample_interval,
            None if self.frontier_cells is None else self.frontier_cells.copy(),
        )

    def subset(self, keep: np.ndarray) -> Roadmap:
        """Vertices where ``keep`` is true, with the edges among them."""
        keep = np.asarray(keep, dtype=bool)
        kept_ids = self.ids[keep]
        if len(self.edges):
            ok = np.isin(self.edges[:, 0], kept_ids) & np.isin(self.edges[:, 1], kept_ids)
        else:
            ok = np.zeros(0, dtype=bool)
        return Roadmap(
            kept_ids, self.positions[keep], self.is_frontier[keep], self.frontier_origin[keep],
            self.edges[ok], self.lengths[ok], self.sample_interval, self.frontier_cells,
        )

    def component_labels(self) -> np.ndarray:
        """Connected-component label per vertex (union-find over edges)."""
        parent = list(range(len(self.ids)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        idx = self.index_of()
        for a, b in self.edges:
            ra, rb = find(idx[int(a)]), find(idx[int(b)])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return np.array([find(i) for i in range(len(self.ids))], dtype=np.int64)

    def n_components(self) -> int:
        if len(self.ids) == 0:
            return 0
        return len(np.unique(self.component_labels()))

    def to_json(self) -> dict:
        return {
            "sample_interval": self.sample_interval,
            "vertices": [
                [int(i), float(p[0]), float(p[1]), bool(f), int(o)]
                for i, p, f, o in zip(self.ids, self.positions, self.is_frontier, self.frontier_origin)
            ],
            "edges": [[int(a), int(b), float(l)] for (a, b), l in zip(self.edges, self.lengths)],
        }

    @classmethod
    def from_json(cls, data: dict) -> Roadmap:
        verts = data["vertices"]
        edges = data["edges"]
        return cls(
            np.array([v[0] for v in verts], dtype=np.int64),
            np.array([[v[1], v[2]] for v in verts], dtype=float).reshape(-1, 2),
            np.array([v[3] for v in verts], dtype=bool),
            np.array([v[4] for v in verts], dtype=np.int8),
            np.array([[e[0], e[1]] for e in edges], dtype=np.int64).reshape(-1, 2),
            np.array([e[2] for e in edges], dtype=float),
            float(data["sample_interval"]),
        )


_LATTICE_DIRS = ((1, 0), (0, 1), (1, 1), (-1, 1))


def _stencil(p0: np.ndarray, p1: np.ndarray, geo: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Cells (rows, cols) a segment touches, including both flanks of exact corner crossings."""
    d = p1 - p0
    length = float(np.hypot(*d))
    tr = traverse(p0, np.array([math.atan2(d[1], d[0])]), length, geo.resolution)
    keep = tr.t_entry[0] < length - 1e-12
    ix = [tr.ix[0][keep]]
    iy = [tr.iy[0][keep]]
    corner = tr.corner[0] & keep
    ix += [tr.side_a[0][0][corner], tr.side_b[0][0][corner]]
    iy += [tr.side_a[1][0][corner], tr.side_b[1][0][corner]]
    end_ix, end_iy = np.floor(p1 / geo.resolution).astype(np.int64)
    ix.append(np.array([end_ix]))
    iy.append(np.array([end_iy]))
    ix = np.concatenate(ix)
    iy = np.concatenate(iy)
    return iy - geo.origin[1], ix - geo.origin[0]


def sample_roadmap(grid: TraversabilityGrid, sample_interval: float) -> Roadmap:
    """Keep the traversable points of a square lattice anchored at the window center
    and join 8-neighbors whose connecting segment stays on traversable cells."""
    geo = grid.geometry
    if sample_interval < geo.resolution - 1e-12:
        raise ValueError("sample_interval must be at least the grid resolution")
    half = geo.n * geo.resolution / 2.0
    K = int(math.floor(half / sample_interval + 1e-9))
    ks = np.arange(-K, K + 1)
    center = geo.center_xy()
    kx, ky = np.meshgrid(ks, ks)
    pts = np.stack([center[0] + kx * sample_interval, center[1] + ky * sample_interval], axis=-1)
    rows, cols = geo.local_index(pts.reshape(-1, 2))
    inside = geo.inside(rows, cols)
    ok = np.zeros(rows.shape, dtype=bool)
    ok[inside] = grid.traversable[rows[inside], cols[inside]]
    m = 2 * K + 1
    ok = ok.reshape(m, m)
    if not ok.any():
        return Roadmap.empty(sample_interval)
    vid = -np.ones((m, m), dtype=np.int64)
    vid[ok] = np.arange(int(ok.sum()))
    positions = pts[ok]
    v_rows = rows.reshape(m, m)
    v_cols = cols.reshape(m, m)

    pitch = sample_interval / geo.resolution
    exact = abs(pitch - round(pitch)) < 1e-9
    edges = []
    for dx, dy in _LATTICE_DIRS:
        a_y, a_x = np.nonzero(ok)
        b_y, b_x = a_y + dy, a_x + dx
        valid = (b_y >= 0) & (b_y < m) & (b_x >= 0) & (b_x < m)
        a_y, a_x, b_y, b_x = a_y[valid], a_x[valid], b_y[valid], b_x[valid]
        has_b = ok[b_y, b_x]
        a_y, a_x, b_y, b_x = a_y[has_b], a_x[has_b], b_y[has_b], b_x[has_b]
        if len(a_y) == 0:
            continue
        if exact:
            # every edge in this direction crosses the same cell offsets
            p0 = pts[a_y[0], a_x[0]]
            p1 = pts[b_y[0], b_x[0]]
            sr, sc = _stencil(p0, p1, geo)
            r0, c0 = v_rows[a_y[0], a_x[0]], v_cols[a_y[0], a_x[0]]
            dr, dc = sr - r0, sc - c0
            rr = v_rows[a_y, a_x][:, None] + dr[None, :]
            cc = v_cols[a_y, a_x][:, None] + dc[None, :]
            inside_s = geo.inside(rr, cc)
            good = np.zeros(rr.shape, dtype=bool)
            good[inside_s] = grid.traversable[rr[inside_s], cc[inside_s]]
            clear = good.all(axis=1)
        else:
            clear = np.empty(len(a_y), dtype=bool)
            for i in range(len(a_y)):
                sr, sc = _stencil(pts[a_y[i], a_x[i]], pts[b_y[i], b_x[i]], geo)
                ins = geo.inside(sr, sc)
                clear[i] = ins.all() and grid.traversable[sr, sc].all()
        for i in np.flatnonzero(clear):
            edges.append((vid[a_y[i], a_x[i]], vid[b_y[i], b_x[i]]))
    edges_arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges_arr):
        order = np.lexsort((edges_arr[:, 1], edges_arr[:, 0]))
        edges_arr = edges_arr[order]
    lengths = np.hypot(*(positions[edges_arr[:, 0]] - positions[edges_arr[:, 1]]).T) if len(edges_arr) else np.zeros(0)
    n = len(positions)
    return Roadmap(
        np.arange(n, dtype=np.int64), positions, np.zeros(n, dtype=bool),
        np.zeros(n, dtype=np.int8), edges_arr, np.asarray(lengths, dtype=float), sample_interval,
    )


# ------------------------------------------------------------------- frontiers


def reachable_region(grid: TraversabilityGrid, robot_cell: tuple[int, int]) -> np.ndarray:
    """Cells 4-connected to ``robot_cell`` through passable cells."""
    r, c = robot_cell
    n = grid.geometry.n
    if not (0 <= r < n and 0 <= c < n) or not grid.passable[r, c]:
        raise RobotCellNotTraversable(f"robot cell {robot_cell} is not traversable")
    labels, _ = ndimage.label(grid.passable, structure=FOUR)
    return labels == labels[r, c]


def frontier_cell_mask(grid: TraversabilityGrid, robot_cell: tuple[int, int]) -> np.ndarray:
    """Reachable free cells 4-adjacent to an unknown cell. Cells outside the
    window count as unknown: the window cannot vouch for them."""
    reach = reachable_region(grid, robot_cell)
    unknown = np.pad(grid.state == UNKNOWN, 1, constant_values=True)
    adj = unknown[:-2, 1:-1] | unknown[2:, 1:-1] | unknown[1:-1, :-2] | unknown[1:-1, 2:]
    return reach & adj & (grid.state == FREE)


def _nearest_lowest_id(tree: cKDTree, ids: np.ndarray, pts: np.ndarray) -> np.ndarray:
    k = min(4, len(ids))
    dist, idx = tree.query(pts, k=k)
    dist = np.asarray(dist).reshape(len(pts), k)
    idx = np.asarray(idx).reshape(len(pts), k)
    best = dist[:, :1]
    cand_ids = np.where(dist <= best + 1e-9, ids[idx], np.iinfo(np.int64).max)
    return cand_ids.min(axis=1)


def detect_frontiers(local_map: LocalMetricMap, grid: TraversabilityGrid, roadmap: Roadmap,
                     robot_cell: tuple[int, int], min_frontier_cells: int = 3) -> Roadmap:
    """Wavefront frontier detection; marks the roadmap vertex nearest to every
    cell of each sufficiently large frontier cluster."""
    cells = frontier_cell_mask(grid, robot_cell)
    reach = reachable_region(grid, robot_cell)
    out = roadmap.copy()
    out.is_frontier[:] = False
    out.frontier_cells = cells
    if not cells.any() or len(out) == 0:
        return out
    labels, nlab = ndimage.label(cells, structure=EIGHT)
    sizes = np.bincount(labels.ravel(), minlength=nlab + 1)
    big = sizes >= min_frontier_cells
    big[0] = False
    keep = big[labels]
    if not keep.any():
        return out
    vr, vc = grid.geometry.local_index(out.positions)
    vin = grid.geometry.inside(vr, vc)
    v_ok = np.zeros(len(out), dtype=bool)
    v_ok[vin] = reach[vr[vin], vc[vin]]
    if not v_ok.any():
        return out
    cand_ids = out.ids[v_ok]
    tree = cKDTree(out.positions[v_ok])
    fr, fc = np.nonzero(keep)
    centers = grid.geometry.cell_centers(fr, fc)
    chosen = np.unique(_nearest_lowest_id(tree, cand_ids, centers))
    out.is_frontier[np.isin(out.ids, chosen)] = True
    return out


def robot_component(roadmap: Roadmap, grid: TraversabilityGrid, robot_cell: tuple[int, int]) -> Roadmap:
    """Vertices lying in the region the robot can flood to."""
    if len(roadmap) == 0:
        return roadmap
    reach = reachable_region(grid, robot_cell)
    vr, vc = grid.geometry.local_index(roadmap.positions)
    ok = grid.geometry.inside(vr, vc)
    keep = np.zeros(len(roadmap), dtype=bool)
    keep[ok] = reach[vr[ok], vc[ok]]
    return roadmap.subset(keep)


# --------------------------------------------------------------- serialization


def rle_encode(arr: np.ndarray) -> list[list[int]]:
    flat = np.asarray(arr).ravel()
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [flat.size]]))
    return [[int(flat[s]), int(l)] for s, l in zip(starts, lengths)]


def rle_decode(runs: list[list[int]], shape, dtype=np.uint8) -> np.ndarray:
    vals = np.repeat([r[0] for r in runs], [r[1] for r in runs]).astype(dtype)
    return vals.reshape(shape)


def grid_snapshot(grid: TraversabilityGrid) -> dict:
    """JSON-ready dump: state/traversable/inflated as run-length encodings."""
    g = grid.geometry
    return {
        "resolution": g.resolution,
        "n": g.n,
        "origin": list(g.origin),
        "state_rle": rle_encode(grid.state),
        "traversable_rle": rle_encode(grid.traversable.astype(np.uint8)),
        "inflated_rle": rle_encode(grid.inflated.astype(np.uint8)),
    }
