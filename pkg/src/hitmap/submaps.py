"""Submaps, their persistent store, and local-area composition.

A submap stores everything relative to its own frame: roadmap vertices in
anchor-local coordinates, and a tri-state grid of the cells it has seen
traversable (kept in creation-odometry cell indices, a fixed rigid transform
of the anchor frame). Moving the anchor therefore moves the whole submap
without rewriting any of its content.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from hitmap.errors import FrameMismatch, UnknownSubmapId
from hitmap.geometry import Frame, Pose2
from hitmap.local_mapper import (
    FREE, INCREMENTAL, OBSTACLE, UNKNOWN, Roadmap, TraversabilityGrid, rle_decode, rle_encode,
)
from hitmap.topology import EdgeKind, GlobalTopology

KNOWN_UNSEEN = 0
KNOWN_TRAVERSABLE = 1
KNOWN_BLOCKED = 2


@dataclass(eq=False)
class KnownGrid:
    """Fixed-size tri-state grid around the creation cell, indexed like the
    odometry grid at creation time."""

    resolution: float
    half_cells: int
    origin: tuple[int, int]
    data: np.ndarray = None
    cell_writes: int = 0

    def __post_init__(self):
        if self.data is None:
            side = 2 * self.half_cells
            self.data = np.zeros((side, side), dtype=np.uint8)

    @classmethod
    def around(cls, odom: Pose2, resolution: float, half_extent: float) -> KnownGrid:
        h = int(math.ceil(half_extent / resolution))
        cx = int(math.floor(odom.x / resolution))
        cy = int(math.floor(odom.y / resolution))
        return cls(resolution, h, (cx - h, cy - h))

    @property
    def cell_count(self) -> int:
        return self.data.size

    def update(self, grid: TraversabilityGrid, reach: np.ndarray) -> None:
        """Fold a local traversability snapshot in. Blocked marks are sticky;
        traversable marks only fill cells not known to be blocked."""
        geo = grid.geometry
        if abs(geo.resolution - self.resolution) > 1e-12:
            raise ValueError("resolution mismatch between local map and submap")
        side = self.data.shape[0]
        # overlap in global odometry cell indices
        gx0 = max(geo.origin[0], self.origin[0])
        gy0 = max(geo.origin[1], self.origin[1])
        gx1 = min(geo.origin[0] + geo.n, self.origin[0] + side)
        gy1 = min(geo.origin[1] + geo.n, self.origin[1] + side)
        if gx0 >= gx1 or gy0 >= gy1:
            return
        lr = slice(gy0 - geo.origin[1], gy1 - geo.origin[1])
        lc = slice(gx0 - geo.origin[0], gx1 - geo.origin[0])
        sr = slice(gy0 - self.origin[1], gy1 - self.origin[1])
        sc = slice(gx0 - self.origin[0], gx1 - self.origin[0])
        st = grid.state[lr, lc]
        blocked = (st == OBSTACLE) | grid.near_obstacle[lr, lc] | ((st == FREE) & ~grid.passable[lr, lc])
        trav = grid.traversable[lr, lc] & reach[lr, lc]
        cur = self.data[sr, sc]
        new = cur.copy()
        new[blocked] = KNOWN_BLOCKED
        new[(cur == KNOWN_UNSEEN) & trav & ~blocked] = KNOWN_TRAVERSABLE
        self.cell_writes += int(np.count_nonzero(new != cur))
        self.data[sr, sc] = new

    def traversable_at_odom(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        cols = np.floor(pts[:, 0] / self.resolution).astype(np.int64) - self.origin[0]
        rows = np.floor(pts[:, 1] / self.resolution).astype(np.int64) - self.origin[1]
        side = self.data.shape[0]
        ok = (rows >= 0) & (rows < side) & (cols >= 0) & (cols < side)
        out = np.zeros(len(pts), dtype=bool)
        out[ok] = self.data[rows[ok], cols[ok]] == KNOWN_TRAVERSABLE
        return out

    def to_json(self) -> dict:
        return {
            "resolution": self.resolution,
            "half_cells": self.half_cells,
            "origin": list(self.origin),
            "rle": rle_encode(self.data),
        }

    @classmethod
    def from_json(cls, data: dict) -> KnownGrid:
        h = int(data["half_cells"])
        arr = rle_decode(data["rle"], (2 * h, 2 * h))
        return cls(float(data["resolution"]), h, tuple(data["origin"]), arr)


@dataclass(eq=False)
class Submap:
    id: int
    anchor: Pose2
    creation_odom: Pose2
    roadmap: Roadmap
    known: KnownGrid
    true_anchor: Pose2 | None = None
    # vertices ever observed as non-frontier; their flag is never raised again
    interior: np.ndarray = None
    traveled: float = 0.0
    last_odom: Pose2 | None = None
    _edge_keys: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.interior is None:
            self.interior = ~self.roadmap.is_frontier.copy()
        if self.last_odom is None:
            self.last_odom = self.creation_odom
        if not self._edge_keys and self.roadmap.n_edges:
            self._edge_keys = {(int(min(a, b)), int(max(a, b))) for a, b in self.roadmap.edges}

    @classmethod
    def create(cls, sid: int, odom: Pose2, sample_interval: float, resolution: float,
               known_half_extent: float, true_anchor: Pose2 | None = None) -> Submap:
        if odom.frame != Frame.ODOMETRY:
            raise FrameMismatch("submaps are created from odometry poses")
        return cls(
            id=sid,
            anchor=odom.with_frame(Frame.CORRECTED),
            creation_odom=odom,
            roadmap=Roadmap.empty(sample_interval),
            known=KnownGrid.around(odom, resolution, known_half_extent),
            true_anchor=true_anchor,
        )

    @property
    def frontier_vertex_ids(self) -> set[int]:
        return {int(i) for i in self.roadmap.ids[self.roadmap.is_frontier]}

    def advance(self, odom: Pose2) -> None:
        """Accumulate odometric arc length."""
        self.traveled += self.last_odom.distance(odom)
        self.last_odom = odom

    def odom_to_local(self, pts) -> np.ndarray:
        return self.creation_odom.inverse_transform_points(pts)

    def corrected_points(self) -> np.ndarray:
        return self.anchor.transform_points(self.roadmap.positions)

    def corrected_to_odom(self, pts) -> np.ndarray:
        """Corrected-frame points into this submap's creation-odometry frame."""
        return self.creation_odom.transform_points(self.anchor.inverse_transform_points(pts))

    def traversable_at(self, corrected_pts) -> np.ndarray:
        return self.known.traversable_at_odom(self.corrected_to_odom(corrected_pts))

    def memory_items(self) -> tuple[int, int, int]:
        """(vertices, edges, known-grid cells)."""
        return len(self.roadmap), self.roadmap.n_edges, self.known.cell_count

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "anchor": self.anchor.to_list(),
            "creation_odom": self.creation_odom.to_list(),
            "true_anchor": None if self.true_anchor is None else self.true_anchor.to_list(),
            "traveled": self.traveled,
            "last_odom": self.last_odom.to_list(),
            "roadmap": self.roadmap.to_json(),
            "interior": [bool(v) for v in self.interior],
            "known": self.known.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> Submap:
        roadmap = Roadmap.from_json(data["roadmap"])
        return cls(
            id=int(data["id"]),
            anchor=Pose2.from_list(data["anchor"]),
            creation_odom=Pose2.from_list(data["creation_odom"]),
            roadmap=roadmap,
            known=KnownGrid.from_json(data["known"]),
            true_anchor=None if data["true_anchor"] is None else Pose2.from_list(data["true_anchor"]),
            interior=np.array(data["interior"], dtype=bool),
            traveled=float(data["traveled"]),
            last_odom=Pose2.from_list(data["last_odom"]),
        )

    def canonical(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class SubmapStore:
    """Submaps by id; persists as one JSON file per submap plus a topology index."""

    def __init__(self):
        self._submaps: dict[int, Submap] = {}

    def add(self, submap: Submap) -> None:
        self._submaps[submap.id] = submap

    def get(self, sid: int) -> Submap:
        try:
            return self._submaps[sid]
        except KeyError:
            raise UnknownSubmapId(sid) from None

    def __contains__(self, sid) -> bool:
        return sid in self._submaps

    def __len__(self) -> int:
        return len(self._submaps)

    def ids(self) -> list[int]:
        return sorted(self._submaps)

    def values(self):
        return [self._submaps[i] for i in self.ids()]

    def save(self, directory, topology: GlobalTopology | None = None) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for sm in self.values():
            (d / f"submap_{sm.id:05d}.json").write_text(sm.canonical())
        if topology is not None:
            (d / "topology.json").write_text(canonical_json(topology.to_json()))

    @classmethod
    def load(cls, directory) -> tuple[SubmapStore, GlobalTopology | None]:
        d = Path(directory)
        store = cls()
        for f in sorted(d.glob("submap_*.json")):
            store.add(Submap.from_json(json.loads(f.read_text())))
        topo = None
        if (d / "topology.json").exists():
            topo = GlobalTopology.from_json(json.loads((d / "topology.json").read_text()))
        return store, topo


# -------------------------------------------------------------------- spawning


def maybe_spawn_submap(current_odom: Pose2, active: Submap, interval: float,
                       known_half_extent: float | None = None,
                       true_anchor: Pose2 | None = None) -> Submap | None:
    """Fresh submap once the active one has accumulated ``interval`` of arc length."""
    if interval <= 0:
        raise ValueError("interval must be positive")
    if active.traveled + 1e-12 < interval:
        return None
    half = known_half_extent if known_half_extent is not None else active.known.half_cells * active.known.resolution
    return Submap.create(active.id + 1, current_odom, active.roadmap.sample_interval,
                         active.known.resolution, half, true_anchor)


# --------------------------------------------------------------------- merging


def clear_stale_frontiers(submap: Submap, grid: TraversabilityGrid, fresh: Roadmap | None = None,
                          tol: float = 0.0) -> int:
    """Drop the frontier flag of stored vertices the window has re-observed.

    A stored frontier on a known cell of ``grid`` keeps its flag only if a
    frontier vertex of the ``fresh`` roadmap (odometry frame, sampled from the
    same grid) lies within ``tol`` of it. This catches vertices that are now
    blocked, cut off, or fully explored.
    """
    rm = submap.roadmap
    rows = np.flatnonzero(rm.is_frontier)
    if len(rows) == 0:
        return 0
    odom_pts = submap.creation_odom.transform_points(rm.positions[rows])
    r, c = grid.geometry.local_index(odom_pts)
    inside = grid.geometry.inside(r, c)
    seen = np.zeros(len(rows), dtype=bool)
    seen[inside] = grid.state[r[inside], c[inside]] != UNKNOWN
    if fresh is not None and fresh.is_frontier.any() and seen.any():
        d, _ = cKDTree(fresh.positions[fresh.is_frontier]).query(odom_pts[seen], k=1)
        still = np.zeros(len(rows), dtype=bool)
        still[np.flatnonzero(seen)] = d <= tol + 1e-9
        seen &= ~still
    rm.is_frontier[rows[seen]] = False
    return int(seen.sum())


def merge_local_into_submap(submap: Submap, local_roadmap: Roadmap, local_center: Pose2,
                            dedup_epsilon: float, sticky_interior: bool = True,
                            grid: TraversabilityGrid | None = None) -> Submap:
    """Append the unseen part of a local roadmap to ``submap`` (in place).

    Stored vertices never move and are never removed. A matched vertex takes the
    newer frontier flag, except that with ``sticky_interior`` a vertex once seen
    as non-frontier is not flagged again (the local window forgets what it left
    behind, so its trailing edge always looks unexplored). Given the ``grid`` the
    roadmap was sampled from, stored frontiers on cells it has observed are
    refreshed too, including ones the new roadmap dropped.
    """
    if local_center.frame != Frame.ODOMETRY:
        raise FrameMismatch("local roadmap must be given in the odometry frame")
    if grid is not None:
        clear_stale_frontiers(submap, grid, local_roadmap, dedup_epsilon)
    if len(local_roadmap) == 0:
        return submap
    rm = submap.roadmap
    pts = submap.odom_to_local(local_roadmap.positions)
    n_old = len(rm)
    # slack so points exactly epsilon apart count as duplicates despite rounding
    eps = dedup_epsilon + 1e-9
    match = -np.ones(len(pts), dtype=np.int64)
    if n_old:
        dist, idx = cKDTree(rm.positions).query(pts, k=1, distance_upper_bound=eps)
        hit = np.isfinite(dist) & (dist <= eps)
        match[hit] = idx[hit]
    new_mask = match < 0
    if new_mask.any():
        # collapse near-duplicates within the incoming batch as well
        new_idx = np.flatnonzero(new_mask)
        tree = cKDTree(pts[new_idx])
        groups = tree.query_ball_point(pts[new_idx], eps)
        rep = {}
        for k, g in enumerate(groups):
            rep[k] = min(g)
        keep_new = [k for k in range(len(new_idx)) if rep[k] == k]
        next_id = int(rm.ids.max()) + 1 if n_old else 0
        local_to_sub = {}
        for offset, k in enumerate(keep_new):
            local_to_sub[new_idx[k]] = next_id + offset
        for k in range(len(new_idx)):
            if rep[k] != k:
                local_to_sub[new_idx[k]] = local_to_sub[new_idx[rep[k]]]
        add_idx = new_idx[keep_new]
    else:
        local_to_sub = {}
        add_idx = np.zeros(0, dtype=np.int64)

    l_front = local_roadmap.is_frontier
    # refresh matched vertices
    if (~new_mask).any():
        mi = np.flatnonzero(~new_mask)
        rows = match[mi]
        fr = l_front[mi]
        if sticky_interior:
            rm.is_frontier[rows] = fr & ~submap.interior[rows]
        else:
            rm.is_frontier[rows] = fr
        submap.interior[rows] |= ~fr

    sub_id = np.empty(len(pts), dtype=np.int64)
    sub_id[~new_mask] = rm.ids[match[~new_mask]]
    for li, sid in local_to_sub.items():
        sub_id[li] = sid

    if len(add_idx):
        k = len(add_idx)
        rm.ids = np.concatenate([rm.ids, sub_id[add_idx]])
        rm.positions = np.concatenate([rm.positions, pts[add_idx]])
        rm.is_frontier = np.concatenate([rm.is_frontier, l_front[add_idx]])
        rm.frontier_origin = np.concatenate([rm.frontier_origin, np.full(k, INCREMENTAL, dtype=np.int8)])
        submap.interior = np.concatenate([submap.interior, ~l_front[add_idx]])

    if local_roadmap.n_edges:
        lid_index = local_roadmap.index_of()
        id_to_row = None
        new_edges = []
        for a, b in local_roadmap.edges:
            sa = int(sub_id[lid_index[int(a)]])
            sb = int(sub_id[lid_index[int(b)]])
            if sa == sb:
                continue
            key = (sa, sb) if sa < sb else (sb, sa)
            if key in submap._edge_keys:
                continue
            submap._edge_keys.add(key)
            new_edges.append(key)
        if new_edges:
            id_to_row = rm.index_of()
            e = np.array(new_edges, dtype=np.int64)
            pa = rm.positions[[id_to_row[int(x)] for x in e[:, 0]]]
            pb = rm.positions[[id_to_row[int(x)] for x in e[:, 1]]]
            rm.edges = np.concatenate([rm.edges, e])
            rm.lengths = np.concatenate([rm.lengths, np.hypot(*(pa - pb).T)])
    return submap


# ------------------------------------------------------------------ local area


def _segment_samples(p0: np.ndarray, p1: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample points along each segment; returns (points (M, 2), owner segment (M,))."""
    d = p1 - p0
    lengths = np.hypot(d[:, 0], d[:, 1])
    counts = np.maximum(np.ceil(lengths / step).astype(np.int64), 1) + 1
    owner = np.repeat(np.arange(len(p0)), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    k = np.arange(owner.size) - np.repeat(starts, counts)
    f = k / np.repeat(counts - 1, counts)
    pts = p0[owner] + d[owner] * f[:, None]
    return pts, owner


def segments_clear_union(p0: np.ndarray, p1: np.ndarray, members, step: float | None = None) -> np.ndarray:
    """Per-segment check: every sample lies on a cell some member knows traversable."""
    p0 = np.asarray(p0, dtype=float).reshape(-1, 2)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    if len(p0) == 0:
        return np.zeros(0, dtype=bool)
    if step is None:
        step = min(sm.known.resolution for sm in members) / 4.0
    pts, owner = _segment_samples(p0, p1, step)
    ok = np.zeros(len(pts), dtype=bool)
    for sm in members:
        todo = ~ok
        if not todo.any():
            break
        ok[todo] = sm.traversable_at(pts[todo])
    bad = np.bincount(owner, weights=~ok, minlength=len(p0))
    return bad == 0


@dataclass(eq=False)
class LocalArea:
    member_submap_ids: tuple[int, ...]
    merged_roadmap: Roadmap
    # (submap_id, vertex_id) of each merged vertex
    keys: np.ndarray
    merged_frontiers: set
    bridge_edges: list
    members: list = field(default_factory=list, repr=False)
    demoted: set = field(default_factory=set)
    # trusted bridges realizing unchecked loop edges (ablation)
    unchecked_edges: set = field(default_factory=set)
    # per member: (vertex ids, merged index of each), deduplicated vertices included
    member_index: dict = field(default_factory=dict, repr=False)
    _member_data: dict = field(default_factory=dict, repr=False)
    _adj: object = field(default=None, repr=False)
    _tree: cKDTree | None = field(default=None, repr=False)

    @property
    def positions(self) -> np.ndarray:
        return self.merged_roadmap.positions

    def key_of(self, idx: int) -> tuple[int, int]:
        return int(self.keys[idx, 0]), int(self.keys[idx, 1])

    def index_of_key(self) -> dict:
        return {(int(s), int(v)): i for i, (s, v) in enumerate(self.keys)}

    def merged_index(self, key) -> int | None:
        """Merged vertex standing for member vertex ``key`` (after deduplication)."""
        sid, vid = key
        entry = self.member_index.get(int(sid))
        if entry is None:
            return None
        ids, idx = entry
        j = int(np.searchsorted(ids, vid))
        if j < len(ids) and ids[j] == vid:
            return int(idx[j])
        return None

    def adjacency(self):
        if self._adj is None:
            from hitmap.search import CSRAdjacency

            self._adj = CSRAdjacency(len(self.keys), self.merged_roadmap.edges, self.merged_roadmap.lengths)
        return self._adj

    def tree(self) -> cKDTree | None:
        if self._tree is None and len(self.keys):
            self._tree = cKDTree(self.positions)
        return self._tree

    def segments_clear(self, p0, p1) -> np.ndarray:
        return segments_clear_union(p0, p1, self.members)

    def points_traversable(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        ok = np.zeros(len(pts), dtype=bool)
        for sm in self.members:
            ok |= sm.traversable_at(pts)
        return ok

    def frontier_indices(self) -> np.ndarray:
        return np.flatnonzero(self.merged_roadmap.is_frontier)

    def memory_items(self) -> tuple[int, int, int]:
        cells = sum(sm.known.cell_count for sm in self.members)
        return len(self.keys), self.merged_roadmap.n_edges, cells

    def canonical(self) -> str:
        rm = self.merged_roadmap
        return canonical_json({
            "members": list(self.member_submap_ids),
            "vertices": [[int(s), int(v), float(p[0]), float(p[1]), bool(f)]
                         for (s, v), p, f in zip(self.keys, rm.positions, rm.is_frontier)],
            "edges": sorted([sorted([self.key_of(a), self.key_of(b)]) + [float(l)]
                             for (a, b), l in zip(rm.edges, rm.lengths)]),
        })


def _sorted_ids(sm: Submap) -> tuple[np.ndarray, np.ndarray]:
    ids = sm.roadmap.ids
    order = np.argsort(ids, kind="stable")
    return ids[order], order


def compose_local_area(topology: GlobalTopology, submaps: SubmapStore, current_id: int,
                       connect_radius: float, dedup_epsilon: float | None = None,
                       reconcile: bool = True) -> LocalArea:
    """Merge the current submap with its one-hop topology neighbors."""
    cur = submaps.get(current_id)
    if current_id not in topology.nodes:
        raise UnknownSubmapId(current_id)
    s = cur.roadmap.sample_interval
    if connect_radius < s - 1e-12:
        raise ValueError("connect_radius must be at least the sample interval")
    eps = s / 3.0 if dedup_epsilon is None else dedup_epsilon
    member_ids = tuple(sorted({current_id, *topology.neighbors(current_id)}))
    members = [submaps.get(i) for i in member_ids]

    member_data = {}
    member_index = {}
    kept_pts, kept_keys, kept_front = [], [], []
    edge_parts = []
    tree = None
    n_kept = 0
    for sm in members:
        pts = sm.corrected_points()
        member_data[sm.id] = (pts, sm.roadmap.ids, sm.roadmap.is_frontier.copy())
        if len(pts) == 0:
            member_index[sm.id] = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
            continue
        merged = np.full(len(pts), -1, dtype=np.int64)
        if tree is not None:
            # earlier (lower id) members win duplicates
            dist, idx = tree.query(pts, k=1, distance_upper_bound=eps + 1e-9)
            hit = np.isfinite(dist) & (dist <= eps + 1e-9)
            merged[hit] = idx[hit]
        fresh = merged < 0
        n_fresh = int(fresh.sum())
        merged[fresh] = n_kept + np.arange(n_fresh)
        kept_pts.append(pts[fresh])
        kept_keys.append(np.stack([np.full(n_fresh, sm.id), sm.roadmap.ids[fresh]], axis=1))
        kept_front.append(sm.roadmap.is_frontier[fresh])
        n_kept += n_fresh
        tree = cKDTree(np.concatenate(kept_pts))
        sorted_ids, order = _sorted_ids(sm)
        member_index[sm.id] = (sorted_ids, merged[order])
        if sm.roadmap.n_edges:
            rows = np.searchsorted(sorted_ids, sm.roadmap.edges)
            edge_parts.append(merged[order][rows])

    if n_kept == 0:
        rm = Roadmap.empty(s)
        area = LocalArea(member_ids, rm, np.zeros((0, 2), dtype=np.int64), set(), [], members,
                         member_index=member_index)
        area._member_data = member_data
        return area

    positions = np.concatenate(kept_pts)
    keys = np.concatenate(kept_keys).astype(np.int64)
    is_front = np.concatenate(kept_front)
    owner = keys[:, 0]

    def encode(lo, hi):
        return lo * n_kept + hi

    if edge_parts:
        e = np.concatenate(edge_parts)
        e = e[e[:, 0] != e[:, 1]]
        lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        codes = np.unique(encode(lo, hi))
    else:
        codes = np.zeros(0, dtype=np.int64)

    bridges = []
    unchecked = set()
    extra = []
    pairs = cKDTree(positions).query_pairs(connect_radius, output_type="ndarray")
    if len(pairs):
        pairs = pairs[owner[pairs[:, 0]] != owner[pairs[:, 1]]]
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        new = ~np.isin(encode(lo, hi), codes)
        lo, hi = lo[new], hi[new]
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        if len(lo):
            clear = segments_clear_union(positions[lo], positions[hi], members)
            lo, hi = lo[clear], hi[clear]
            extra.append(encode(lo, hi))
            bridges = [(tuple(int(x) for x in keys[a]), tuple(int(x) for x in keys[b])) for a, b in zip(lo, hi)]

    for e in topology.edges:
        if e.kind != EdgeKind.UNCHECKED_LOOP:
            continue
        if e.a not in member_ids or e.b not in member_ids:
            continue
        ia = np.flatnonzero(owner == e.a)
        ib = np.flatnonzero(owner == e.b)
        if len(ia) == 0 or len(ib) == 0:
            continue
        d, j = cKDTree(positions[ib]).query(positions[ia], k=1)
        k = int(np.argmin(d))
        a, b = int(ia[k]), int(ib[j[k]])
        a, b = min(a, b), max(a, b)
        code = encode(a, b)
        if not np.isin(code, codes) and all(not np.isin(code, x).any() for x in extra):
            extra.append(np.array([code]))
            unchecked.add((a, b))
            bridges.append((tuple(int(x) for x in keys[a]), tuple(int(x) for x in keys[b])))

    all_codes = np.unique(np.concatenate([codes, *extra])) if extra else codes
    edges = np.stack([all_codes // n_kept, all_codes % n_kept], axis=1).astype(np.int64)
    lengths = np.hypot(*(positions[edges[:, 0]] - positions[edges[:, 1]]).T) if len(edges) else np.zeros(0)
    rm = Roadmap(np.arange(n_kept, dtype=np.int64), positions, is_front.copy(),
                 np.zeros(n_kept, dtype=np.int8), edges, np.asarray(lengths, dtype=float), s)
    frontiers = {(int(a), int(b)) for a, b in keys[is_front]}
    area = LocalArea(member_ids, rm, keys, frontiers, bridges, members,
                     unchecked_edges=unchecked, member_index=member_index)
    area._member_data = member_data
    if reconcile:
        area = reconcile_frontiers(area, submaps)
    return area


def reconcile_frontiers(area: LocalArea, submaps: SubmapStore) -> LocalArea:
    """Demote frontiers covered by another member: a frontier vertex closer than
    one sample interval to a non-frontier vertex of a different member submap.

    The bound is strict because lattices coincide across submaps: the inward
    lattice neighbor of every boundary vertex sits exactly one pitch away and
    says nothing about what lies beyond the boundary.
    """
    data = area._member_data
    if len(data) < 2:
        return area
    s = area.merged_roadmap.sample_interval
    trees = {}
    for sid, (pts, ids, front) in data.items():
        interior = pts[~front]
        trees[sid] = cKDTree(interior) if len(interior) else None
    demoted = set(area.demoted)
    for sid, (pts, ids, front) in data.items():
        if not front.any():
            continue
        fpts = pts[front]
        fids = ids[front]
        covered = np.zeros(len(fpts), dtype=bool)
        for other, tree in trees.items():
            if other == sid or tree is None:
                continue
            d, _ = tree.query(fpts, k=1, distance_upper_bound=s - 1e-9)
            covered |= np.isfinite(d)
        demoted.update((sid, int(vid)) for vid in fids[covered])
    if not demoted:
        return area
    rm = area.merged_roadmap
    by_sid: dict[int, list[int]] = {}
    for sid, vid in demoted:
        by_sid.setdefault(sid, []).append(vid)
    for sid, vids in by_sid.items():
        rows = (area.keys[:, 0] == sid) & np.isin(area.keys[:, 1], vids)
        rm.is_frontier[rows] = False
    area.demoted = demoted
    area.merged_frontiers = {k for k in area.merged_frontiers if k not in demoted}
    return area


def persist_demotions(area: LocalArea, submaps: SubmapStore) -> int:
    """Write demoted frontier flags back to the owning submaps."""
    count = 0
    by_sid: dict[int, list[int]] = {}
    for sid, vid in area.demoted:
        by_sid.setdefault(sid, []).append(vid)
    for sid, vids in by_sid.items():
        sm = submaps.get(sid)
        rows = np.isin(sm.roadmap.ids, vids)
        count += int((sm.roadmap.is_frontier & rows).sum())
        sm.roadmap.is_frontier[rows] = False
        sm.interior[rows] = True
    return count
