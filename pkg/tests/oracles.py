"""Brute-force reference implementations the tests compare against.

Nothing here reuses library code paths; each function is the slow, obvious
version of what it checks.
"""

import heapq
import math
from collections import deque

import numpy as np

from hitmap.local_mapper import FREE, UNKNOWN, LocalMetricMap, compute_traversability


def grid_from_state(state, resolution=0.1, heights=None, center=None):
    """TraversabilityGrid whose cell states are ``state`` (rows = y), with the
    window centered on ``center`` (odometry pose) when given."""
    state = np.asarray(state, dtype=np.uint8)
    n = state.shape[0]
    lm = LocalMetricMap(side_length=n * resolution, resolution=resolution, center=center)
    assert lm.n == n
    lm.state[...] = state
    lm.observation_count[...] = (state != UNKNOWN).astype(np.int64)
    if heights is not None:
        lm.height_mean[...] = heights
    return lm, compute_traversability(lm)


def ray_box_entry(ox, oy, dx, dy, x0, y0, x1, y1):
    """Slab test: entry distance of a ray into an axis-aligned box, or inf."""
    tmin, tmax = -math.inf, math.inf
    for o, d, lo, hi in ((ox, dx, x0, x1), (oy, dy, y0, y1)):
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return math.inf
            continue
        a, b = (lo - o) / d, (hi - o) / d
        tmin, tmax = max(tmin, min(a, b)), min(tmax, max(a, b))
    if tmax < max(tmin, 0.0):
        return math.inf
    return max(tmin, 0.0)


def analytic_range(world, x, y, angle, max_range):
    """Closest obstacle-cell box along the ray, clipped at max_range."""
    res = world.resolution
    dx, dy = math.cos(angle), math.sin(angle)
    best = max_range
    rows, cols = np.nonzero(world.cells)
    for r, c in zip(rows, cols):
        cx0, cy0 = c * res, r * res
        # cheap reject: box farther than current best
        if math.hypot(cx0 + res / 2 - x, cy0 + res / 2 - y) - res > best:
            continue
        t = ray_box_entry(x, y, dx, dy, cx0, cy0, cx0 + res, cy0 + res)
        best = min(best, t)
    return best


def bfs_reachable(passable, start):
    """4-connected flood over ``passable`` from ``start`` (row, col)."""
    h, w = passable.shape
    seen = np.zeros_like(passable, dtype=bool)
    if not passable[start]:
        return seen
    q = deque([start])
    seen[start] = True
    while q:
        r, c = q.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and passable[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                q.append((nr, nc))
    return seen


def frontier_cells_bruteforce(state, passable, start):
    """Reachable free cells with an unknown (or off-window) 4-neighbor."""
    h, w = state.shape
    reach = bfs_reachable(passable, start)
    out = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            if not reach[r, c] or state[r, c] != FREE:
                continue
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or state[nr, nc] == UNKNOWN:
                    out[r, c] = True
                    break
    return out


def dijkstra_cost(n, edges, lengths, s, t):
    """Textbook Dijkstra over an undirected edge list."""
    adj = [[] for _ in range(n)]
    for (a, b), w in zip(edges, lengths):
        adj[int(a)].append((int(b), float(w)))
        adj[int(b)].append((int(a), float(w)))
    dist = [math.inf] * n
    dist[s] = 0.0
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == t:
            return d
        for v, w in adj[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return math.inf


def components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n)})


def pairwise_distances(pts):
    pts = np.asarray(pts, dtype=float)
    d = pts[:, None, :] - pts[None, :, :]
    return np.sort(np.hypot(d[..., 0], d[..., 1])[np.triu_indices(len(pts), 1)])


def compose(a, b):
    """(x, y, theta) composition written out by hand."""
    ax, ay, at = a
    bx, by, bt = b
    return (ax + math.cos(at) * bx - math.sin(at) * by,
            ay + math.sin(at) * bx + math.cos(at) * by,
            at + bt)


def random_state(rng, n=40, p_obstacle=0.15, p_unknown=0.25):
    """Random tri-state map with blobby obstacles and unknown patches; the
    center cell is free."""
    from scipy import ndimage

    from hitmap.local_mapper import OBSTACLE

    noise = ndimage.uniform_filter(rng.random((n, n)), size=3)
    state = np.full((n, n), FREE, dtype=np.uint8)
    unk = ndimage.uniform_filter(rng.random((n, n)), size=5)
    state[unk < np.quantile(unk, p_unknown)] = UNKNOWN
    state[noise < np.quantile(noise, p_obstacle)] = OBSTACLE
    c = n // 2
    state[c - 1:c + 2, c - 1:c + 2] = FREE
    return state


def nearest_vertex_lowest_id(positions, ids, p):
    d = np.hypot(positions[:, 0] - p[0], positions[:, 1] - p[1])
    best = d.min()
    return int(ids[d <= best + 1e-9].min())
