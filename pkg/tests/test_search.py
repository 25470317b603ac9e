import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitmap.errors import NoPath
from hitmap.search import CSRAdjacency, astar, build_adjacency, dijkstra

from oracles import dijkstra_cost


def random_geometric_graph(rng, n, radius):
    pts = rng.uniform(0, 10, (n, 2))
    d = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    a, b = np.nonzero(np.triu(d <= radius, 1))
    edges = np.stack([a, b], axis=1)
    return pts, edges, d[a, b]


def euclid(pts, goal):
    return lambda v: math.dist(pts[v], pts[goal])


@given(st.integers(0, 2**31 - 1), st.integers(2, 120))
@settings(max_examples=60)
def test_astar_cost_equals_dijkstra(seed, n):
    rng = np.random.default_rng(seed)
    pts, edges, lengths = random_geometric_graph(rng, n, 2.5)
    s, t = (int(v) for v in rng.choice(n, 2, replace=False))
    ref = dijkstra_cost(n, edges, lengths, s, t)
    adj = CSRAdjacency(n, edges, lengths)
    if math.isinf(ref):
        with pytest.raises(NoPath):
            astar(adj, s, t, euclid(pts, t))
        return
    path, cost = astar(adj, s, t, euclid(pts, t))
    assert cost == ref
    assert path[0] == s and path[-1] == t
    assert dijkstra(adj, s)[t] == ref


def test_start_equals_goal():
    adj = build_adjacency(3, [(0, 1), (1, 2)], [1.0, 1.0])
    assert astar(adj, 1, 1, lambda v: 0.0) == ([1], 0.0)


def test_disconnected_raises():
    adj = build_adjacency(4, [(0, 1), (2, 3)], [1.0, 1.0])
    with pytest.raises(NoPath):
        astar(adj, 0, 3, lambda v: 0.0)


def test_dijkstra_targets_stop_early():
    adj = build_adjacency(5, [(0, 1), (1, 2), (2, 3), (3, 4)], [1.0] * 4)
    d = dijkstra(adj, 0, targets=[1])
    assert d[1] == 1.0
    assert 4 not in d


def test_csr_matches_list_adjacency():
    rng = np.random.default_rng(2)
    pts, edges, lengths = random_geometric_graph(rng, 60, 2.0)
    a = build_adjacency(60, edges, lengths)
    b = CSRAdjacency(60, edges, lengths)
    for v in range(60):
        assert sorted(a[v]) == sorted(b[v])
    assert b.get(99) == ()
    with pytest.raises(KeyError):
        b[99]
