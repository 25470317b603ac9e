"""Global submap graph: sequential chain, loop edges, connectivity validation,
and loop correction by anchor updates only."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from hitmap.errors import NoSuchLoopEdge, NonConsecutiveIds, UnknownSubmapId, ValidationNotPerformed
from hitmap.geometry import Frame, Pose2
from hitmap.search import astar


class EdgeKind(str, Enum):
    SEQUENTIAL = "Sequential"
    VALIDATED_LOOP = "ValidatedLoop"
    # loop accepted without a connectivity check (ablation only)
    UNCHECKED_LOOP = "UncheckedLoop"


LOOP_KINDS = (EdgeKind.VALIDATED_LOOP, EdgeKind.UNCHECKED_LOOP)


@dataclass
class TopologyEdge:
    a: int
    b: int
    kind: EdgeKind
    length: float


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(eq=False)
class GlobalTopology:
    nodes: dict[int, Pose2] = field(default_factory=dict)
    edges: list[TopologyEdge] = field(default_factory=list)
    epoch: int = 0
    _validated: set = field(default_factory=set, repr=False)
    _rejected: set = field(default_factory=set, repr=False)

    def add_node(self, sid: int, anchor: Pose2) -> None:
        self.nodes[sid] = anchor.with_frame(Frame.CORRECTED)

    def _require(self, *ids: int) -> None:
        for i in ids:
            if i not in self.nodes:
                raise UnknownSubmapId(i)

    def edge(self, a: int, b: int) -> TopologyEdge | None:
        k = _key(a, b)
        for e in self.edges:
            if _key(e.a, e.b) == k:
                return e
        return None

    def has_edge(self, a: int, b: int) -> bool:
        return self.edge(a, b) is not None

    def neighbors(self, sid: int) -> list[int]:
        out = set()
        for e in self.edges:
            if e.a == sid:
                out.add(e.b)
            elif e.b == sid:
                out.add(e.a)
        return sorted(out)

    def degree(self, sid: int) -> int:
        return len(self.neighbors(sid))

    def anchor_distance(self, a: int, b: int) -> float:
        pa, pb = self.nodes[a], self.nodes[b]
        return math.hypot(pa.x - pb.x, pa.y - pb.y)

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        start = min(self.nodes)
        seen = {start}
        stack = [start]
        adj = self.adjacency()
        while stack:
            n = stack.pop()
            for m, _ in adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == len(self.nodes)

    def adjacency(self) -> dict:
        adj = {i: [] for i in sorted(self.nodes)}
        for e in self.edges:
            adj[e.a].append((e.b, e.length))
            adj[e.b].append((e.a, e.length))
        return adj

    def shortest_path(self, start: int, goal: int) -> tuple[list[int], float]:
        self._require(start, goal)
        g = self.nodes[goal]
        return astar(self.adjacency(), start, goal,
                     lambda n: math.hypot(self.nodes[n].x - g.x, self.nodes[n].y - g.y))

    def rejected(self, a: int, b: int) -> bool:
        return (_key(a, b), self.epoch) in self._rejected

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "nodes": [[sid, *self.nodes[sid].to_list()[:3]] for sid in sorted(self.nodes)],
            "edges": [
                [e.a, e.b, e.kind.value, e.length]
                for e in sorted(self.edges, key=lambda e: (e.a, e.b, e.kind.value))
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> GlobalTopology:
        topo = cls(epoch=int(data.get("epoch", 0)))
        for sid, x, y, th in data["nodes"]:
            topo.nodes[int(sid)] = Pose2(x, y, th, Frame.CORRECTED)
        for a, b, kind, length in data["edges"]:
            topo.edges.append(TopologyEdge(int(a), int(b), EdgeKind(kind), float(length)))
        return topo


def add_sequential_edge(topology: GlobalTopology, prev_id: int, new_id: int) -> GlobalTopology:
    if new_id != prev_id + 1:
        raise NonConsecutiveIds(f"sequential edge needs consecutive ids, got ({prev_id}, {new_id})")
    topology._require(prev_id, new_id)
    if not topology.has_edge(prev_id, new_id):
        topology.edges.append(TopologyEdge(prev_id, new_id, EdgeKind.SEQUENTIAL,
                                           topology.anchor_distance(prev_id, new_id)))
    return topology


def _corrected_points(submap) -> np.ndarray:
    return submap.anchor.transform_points(submap.roadmap.positions)


def validate_loop(topology: GlobalTopology, submaps, id_a: int, id_b: int,
                  connect_radius: float) -> bool:
    """True iff some vertex pair of the two submaps within ``connect_radius`` is
    joined by a segment lying on cells either submap knows to be traversable."""
    if id_a == id_b:
        raise ValueError("a loop needs two distinct submaps")
    topology._require(id_a, id_b)
    sa, sb = submaps.get(id_a), submaps.get(id_b)
    if topology.has_edge(id_a, id_b):
        raise ValueError(f"({id_a}, {id_b}) is already an edge")
    ok = _bridge_exists(sa, sb, connect_radius)
    key = _key(id_a, id_b)
    if ok:
        topology._validated.add(key)
    else:
        topology._rejected.add((key, topology.epoch))
    return ok


def _bridge_exists(sa, sb, connect_radius: float) -> bool:
    from hitmap.submaps import segments_clear_union

    pa, pb = _corrected_points(sa), _corrected_points(sb)
    if len(pa) == 0 or len(pb) == 0:
        return False
    tree = cKDTree(pb)
    sdm = cKDTree(pa).sparse_distance_matrix(tree, connect_radius, output_type="ndarray")
    if len(sdm) == 0:
        return False
    order = np.argsort(sdm["v"], kind="stable")
    i = sdm["i"][order]
    j = sdm["j"][order]
    return bool(segments_clear_union(pa[i], pb[j], [sa, sb]).any())


def add_validated_loop(topology: GlobalTopology, id_a: int, id_b: int) -> GlobalTopology:
    topology._require(id_a, id_b)
    if topology.has_edge(id_a, id_b):
        return topology
    if _key(id_a, id_b) not in topology._validated:
        raise ValidationNotPerformed(f"loop ({id_a}, {id_b}) has not passed validate_loop")
    topology.edges.append(TopologyEdge(id_a, id_b, EdgeKind.VALIDATED_LOOP,
                                       topology.anchor_distance(id_a, id_b)))
    return topology


def add_unchecked_loop(topology: GlobalTopology, id_a: int, id_b: int) -> GlobalTopology:
    """Trust a place-recognition loop without checking connectivity."""
    topology._require(id_a, id_b)
    if not topology.has_edge(id_a, id_b):
        topology.edges.append(TopologyEdge(id_a, id_b, EdgeKind.UNCHECKED_LOOP,
                                           topology.anchor_distance(id_a, id_b)))
    return topology


def distribute_correction(anchors: dict[int, Pose2], id_a: int, id_b: int,
                          observed_relative: Pose2) -> dict[int, Pose2]:
    """Spread the loop error linearly over the chain id_a..id_b.

    Submap ``id_a + k`` receives ``k/N`` of the error, composed on its right;
    submaps after ``id_b`` ride along rigidly with ``id_b``.
    """
    if id_a > id_b:
        id_a, id_b = id_b, id_a
        observed_relative = observed_relative.inverse()
    frame = anchors[id_a].frame
    obs = observed_relative.with_frame(frame)
    a_anchor, b_anchor = anchors[id_a], anchors[id_b]
    err = a_anchor.relative(b_anchor).inverse().compose(obs)
    n = id_b - id_a
    out = dict(anchors)
    for k in range(1, n + 1):
        sid = id_a + k
        if sid in anchors:
            out[sid] = anchors[sid].compose(err.scaled(k / n))
    delta = out[id_b].compose(b_anchor.inverse())
    for sid, anchor in anchors.items():
        if sid > id_b:
            out[sid] = delta.compose(anchor)
    return out


def apply_correction(topology: GlobalTopology, submaps, loop: tuple[int, int],
                     observed_relative: Pose2) -> dict[int, Pose2]:
    """Close ``loop`` by moving submap anchors; submap contents are untouched."""
    a, b = loop
    e = topology.edge(a, b)
    if e is None or e.kind not in LOOP_KINDS:
        raise NoSuchLoopEdge(f"no loop edge ({a}, {b})")
    new = distribute_correction(topology.nodes, a, b, observed_relative)
    changed = {sid: p for sid, p in new.items() if p != topology.nodes[sid]}
    topology.nodes = new
    for sid, p in changed.items():
        submaps.get(sid).anchor = p
    for edge in topology.edges:
        edge.length = topology.anchor_distance(edge.a, edge.b)
    if changed:
        topology.epoch += 1
    return new
