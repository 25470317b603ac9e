"""A* and Dijkstra over adjacency lists."""

from __future__ import annotations

import heapq
import math
from typing import Callable, Hashable, Iterable

import numpy as np

from hitmap.errors import NoPath

Adjacency = dict  # node -> iterable of (neighbor, weight)


def astar(adj: Adjacency, start: Hashable, goal: Hashable,
          heuristic: Callable[[Hashable], float]) -> tuple[list, float]:
    """Shortest path with an admissible, consistent heuristic.

    Ties in f are broken by insertion order, so results are deterministic for a
    deterministic adjacency order.
    """
    if start == goal:
        return [start], 0.0
    g = {start: 0.0}
    parent = {start: None}
    closed = set()
    counter = 0
    heap = [(heuristic(start), counter, start)]
    while heap:
        _, _, node = heapq.heappop(heap)
        if node in closed:
            continue
        if node == goal:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1], g[node]
        closed.add(node)
        gn = g[node]
        for nb, w in adj.get(node, ()):
            if nb in closed:
                continue
            cand = gn + w
            if cand < g.get(nb, math.inf):
                g[nb] = cand
                parent[nb] = node
                counter += 1
                heapq.heappush(heap, (cand + heuristic(nb), counter, nb))
    raise NoPath(f"no path from {start!r} to {goal!r}")


def dijkstra(adj: Adjacency, start: Hashable, targets: Iterable[Hashable] | None = None) -> dict:
    """Distances from ``start``; stops early once every target is settled."""
    remaining = set(targets) if targets is not None else None
    dist = {start: 0.0}
    done = set()
    heap = [(0.0, 0, start)]
    counter = 0
    while heap:
        d, _, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if remaining is not None:
            remaining.discard(node)
            if not remaining:
                break
        for nb, w in adj.get(node, ()):
            nd = d + w
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                counter += 1
                heapq.heappush(heap, (nd, counter, nb))
    return {k: v for k, v in dist.items() if k in done}


def build_adjacency(n: int, edges, lengths) -> Adjacency:
    adj: Adjacency = {i: [] for i in range(n)}
    for (a, b), w in zip(edges, lengths):
        a, b, w = int(a), int(b), float(w)
        adj[a].append((b, w))
        adj[b].append((a, w))
    return adj


class CSRAdjacency:
    """Undirected adjacency over nodes 0..n-1 in compressed rows; neighbor
    lists are materialized only for nodes a search actually expands."""

    def __init__(self, n: int, edges, lengths):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=float)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        w = np.concatenate([lengths, lengths])
        # stable sort keeps each node's neighbors in edge order, like build_adjacency
        order = np.argsort(src, kind="stable")
        self.n = n
        self._dst = dst[order]
        self._w = w[order]
        self._ptr = np.searchsorted(src[order], np.arange(n + 1))

    def get(self, node, default=()):
        if not (0 <= node < self.n):
            return default
        a, b = self._ptr[node], self._ptr[node + 1]
        return list(zip(self._dst[a:b].tolist(), self._w[a:b].tolist()))

    def __getitem__(self, node):
        if not (0 <= node < self.n):
            raise KeyError(node)
        return self.get(node)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(range(self.n))
