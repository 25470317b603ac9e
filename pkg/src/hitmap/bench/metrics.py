"""Per-frame metrics, analytic memory accounting, and the JSONL schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

# bytes per stored item; fixed so numbers are portable and deterministic
CELL_BYTES = 25  # state (1) + height mean (8) + height m2 (8) + count (8)
KNOWN_CELL_BYTES = 1
VERTEX_BYTES = 26  # id (8) + x, y (16) + frontier flag + origin
EDGE_BYTES = 24  # two ids + length
TOPO_NODE_BYTES = 32
TOPO_EDGE_BYTES = 28
BEAM_BYTES = 9  # range (8) + hit flag
POSE_BYTES = 24

# nominal per-operation costs behind the modeled frame time
SEC_PER_RAY_CELL = 2e-8
SEC_PER_GRID_CELL = 1e-8
SEC_PER_VERTEX = 2e-7
SEC_PER_EDGE = 1e-7


def roadmap_bytes(n_vertices: int, n_edges: int) -> int:
    return n_vertices * VERTEX_BYTES + n_edges * EDGE_BYTES


def submap_bytes(submap) -> int:
    v, e, cells = submap.memory_items()
    return roadmap_bytes(v, e) + cells * KNOWN_CELL_BYTES + POSE_BYTES * 2


def topology_bytes(topology) -> int:
    return len(topology.nodes) * TOPO_NODE_BYTES + len(topology.edges) * TOPO_EDGE_BYTES


def local_map_bytes(local_map) -> int:
    return local_map.cell_count * CELL_BYTES


def scan_bytes(n_beams: int) -> int:
    return n_beams * BEAM_BYTES + POSE_BYTES


@dataclass
class FrameMetrics:
    frame_num: int
    active_memory_bytes: int
    total_memory_bytes: int
    # modeled from operation counts; wall-clock lives in timing.jsonl
    frame_time: float
    reintegration_cell_writes: int
    mode: str
    distance_to_goal: float
    n_submaps: int = 0
    n_loop_edges: int = 0
    collided: bool = False

    def to_json(self) -> dict:
        return asdict(self)


SCHEMA = {
    "frame_num": int,
    "active_memory_bytes": int,
    "total_memory_bytes": int,
    "frame_time": float,
    "reintegration_cell_writes": int,
    "mode": str,
    "distance_to_goal": float,
    "n_submaps": int,
    "n_loop_edges": int,
    "collided": bool,
}

MODES = {"Backtracing", "Exploration", "Stopped", "Greedy", "Baseline"}


def validate_record(rec: dict) -> None:
    """Raise ValueError unless ``rec`` matches the metrics schema."""
    if set(rec) != set(SCHEMA):
        raise ValueError(f"keys {sorted(rec)} do not match schema")
    for key, typ in SCHEMA.items():
        v = rec[key]
        if typ is float:
            ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        elif typ is int:
            ok = isinstance(v, int) and not isinstance(v, bool)
        else:
            ok = isinstance(v, typ)
        if not ok:
            raise ValueError(f"{key}={v!r} is not {typ.__name__}")
    if rec["frame_num"] < 0 or rec["active_memory_bytes"] < 0 or rec["total_memory_bytes"] < 0:
        raise ValueError("negative count")
    if rec["mode"] not in MODES:
        raise ValueError(f"unknown mode {rec['mode']!r}")


class MetricsWriter:
    """Append-only JSONL sink, one object per frame."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w")

    def write(self, rec: dict) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_metrics(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def tail_slope(values, fraction: float = 0.5) -> tuple[float, float]:
    """Least-squares slope (per frame) and mean over the final ``fraction`` of a series."""
    v = np.asarray(values, dtype=float)
    tail = v[int(len(v) * (1.0 - fraction)):]
    if len(tail) < 2:
        return 0.0, float(tail.mean()) if len(tail) else 0.0
    x = np.arange(len(tail), dtype=float)
    slope = float(np.polyfit(x, tail, 1)[0])
    return slope, float(tail.mean())
