import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitmap.errors import ConfigError, NoFrontiers, NoPath
from hitmap.local_mapper import FREE, OBSTACLE
from hitmap.planner import (
    CostWeights, FrontierEntry, Mode, Plan, PlannerState, frontier_index, frontier_utility,
    plan_backtracing, plan_exploration, select_mode, select_waypoint, utilities,
)
from hitmap.submaps import SubmapStore, compose_local_area
from hitmap.topology import GlobalTopology, add_sequential_edge

from builders import RES, S, chain, odom, oscillation_switches, submap_at
from oracles import dijkstra_cost

W = CostWeights(0.8, 0.2)


# ------------------------------------------------------------------ utility


def test_hand_example_is_nine():
    state = PlannerState(goal=(10.0, 0.0), last_waypoint=(0.0, 5.0))
    assert frontier_utility((0.0, 0.0), (10.0, 0.0), state, W) == pytest.approx(9.0, abs=1e-12)


def test_utility_vanishes_at_goal_and_last():
    state = PlannerState(goal=(3.0, 4.0), last_waypoint=(3.0, 4.0))
    assert frontier_utility((3.0, 4.0), (3.0, 4.0), state, W) == 0.0


def test_no_last_waypoint_means_no_shift_cost():
    state = PlannerState(goal=(0.0, 0.0))
    assert frontier_utility((3.0, 4.0), (0.0, 0.0), state, W) == pytest.approx(0.8 * 5.0)


def test_zero_shift_weight_picks_nearest_to_goal():
    rng = np.random.default_rng(0)
    f = rng.uniform(-10, 10, (40, 2))
    goal = (4.0, -2.0)
    state = PlannerState(goal, last_waypoint=(9.0, 9.0))
    got = select_waypoint(f, goal, state, CostWeights(1.0, 0.0))
    assert got == tuple(f[np.argmin(np.hypot(*(f - goal).T))])


def test_vectorized_utilities_match_scalar():
    rng = np.random.default_rng(1)
    f = rng.uniform(-5, 5, (30, 2))
    state = PlannerState((1.0, 2.0), last_waypoint=(-1.0, 0.5))
    vec = utilities(f, (1.0, 2.0), (-1.0, 0.5), W)
    ref = [frontier_utility(p, (1.0, 2.0), state, W) for p in f]
    np.testing.assert_allclose(vec, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("wd,wl", [(-0.1, 0.5), (0.0, 0.0), (0.5, -1.0)])
def test_invalid_weights(wd, wl):
    with pytest.raises(ConfigError):
        CostWeights(wd, wl)


def test_weight_parsing():
    assert CostWeights.parse("0.7,0.3") == CostWeights(0.7, 0.3)
    with pytest.raises(ConfigError):
        CostWeights.parse("0.7")


# --------------------------------------------------------- waypoint selection


def test_single_frontier():
    state = PlannerState((0.0, 0.0))
    assert select_waypoint([(1.0, 2.0)], (0.0, 0.0), state, W) == (1.0, 2.0)
    assert state.last_waypoint == (1.0, 2.0)


def test_empty_frontier_set():
    with pytest.raises(NoFrontiers):
        select_waypoint([], (0.0, 0.0), PlannerState((0.0, 0.0)), W)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=50)
def test_selection_is_exhaustive_argmin(seed):
    rng = np.random.default_rng(seed)
    f = rng.uniform(-20, 20, (50, 2))
    goal = tuple(rng.uniform(-20, 20, 2))
    last = tuple(rng.uniform(-20, 20, 2)) if rng.random() < 0.8 else None
    state = PlannerState(goal, last_waypoint=last)
    best = min(range(50), key=lambda i: (frontier_utility(f[i], goal, PlannerState(goal, last_waypoint=last), W), i))
    assert select_waypoint(f, goal, state, W) == tuple(f[best])


def test_ties_go_to_lowest_key():
    f = [(0.0, 1.0), (0.0, -1.0)]
    keys = [(3, 7), (2, 9)]
    state = PlannerState((5.0, 0.0))
    assert select_waypoint(f, (5.0, 0.0), state, W, keys=keys) == (0.0, -1.0)
    assert state.waypoint_key == (2, 9)
    state = PlannerState((5.0, 0.0))
    assert select_waypoint(f, (5.0, 0.0), state, W, keys=[(2, 1), (2, 9)]) == (0.0, 1.0)


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
@settings(max_examples=50)
def test_scaling_weights_keeps_choice(seed, c):
    rng = np.random.default_rng(seed)
    f = rng.integers(-20, 20, (30, 2)).astype(float)
    goal = tuple(rng.uniform(-20, 20, 2))
    last = tuple(rng.uniform(-20, 20, 2))
    wd, wl = rng.uniform(0.1, 1.0, 2)
    a = select_waypoint(f, goal, PlannerState(goal, last_waypoint=last), CostWeights(wd, wl))
    b = select_waypoint(f, goal, PlannerState(goal, last_waypoint=last), CostWeights(c * wd, c * wl))
    assert a == b


def test_shift_cost_damps_oscillation():
    greedy = oscillation_switches(0.0)
    damped = oscillation_switches(0.2)
    assert damped < greedy
    assert greedy == 39


# ---------------------------------------------------------- mode and backtracing


def _room_area(state=None, center=None, reachable=True):
    center = center or odom()
    store = SubmapStore()
    topo = GlobalTopology()
    sm = submap_at(0, center, state, reachable=reachable)
    store.add(sm)
    topo.add_node(0, sm.anchor)
    return store, topo, compose_local_area(topo, store, 0, 1.5 * S)


def _wall_state(row=30, thickness=2):
    st = np.full((50, 50), FREE, dtype=np.uint8)
    st[row:row + thickness] = OBSTACLE
    return st


def test_goal_on_vertex_backtracks():
    _, _, area = _room_area()
    assert select_mode(area, tuple(area.positions[17]), S) == Mode.BACKTRACING


def test_goal_far_away_explores():
    _, _, area = _room_area()
    assert select_mode(area, (40.0, 40.0), S) == Mode.EXPLORATION


def test_goal_behind_wall_explores():
    _, _, area = _room_area(_wall_state(thickness=1))
    # wall occupies y in [0.5, 0.6); the goal sits just beyond it, within
    # one pitch of the vertex at y = 0.35
    goal = (0.05, 0.64)
    d = np.hypot(*(area.positions - goal).T)
    near = np.flatnonzero(d <= S)
    assert len(near)
    # oracle: every attachment segment crosses a cell nobody knows traversable
    for i in near:
        p = area.positions[i]
        n = int(math.ceil(math.dist(p, goal) / (RES / 2))) + 1
        pts = p + (np.array(goal) - p) * np.linspace(0, 1, n)[:, None]
        assert not area.points_traversable(pts).all()
    assert select_mode(area, goal, S) == Mode.EXPLORATION


def test_select_mode_rejects_bad_radius():
    _, _, area = _room_area()
    with pytest.raises(ValueError):
        select_mode(area, (0.0, 0.0), 0.0)


def _check_plan(area, plan):
    idx = {(int(min(a, b)), int(max(a, b))): l for (a, b), l in zip(area.merged_roadmap.edges, area.merged_roadmap.lengths)}
    total = 0.0
    for a, b in zip(plan.graph_path, plan.graph_path[1:]):
        total += idx[(min(a, b), max(a, b))]
    assert plan.cost == pytest.approx(total, abs=1e-9)
    for k, v in enumerate(plan.graph_path):
        assert plan.waypoints[k] == pytest.approx(tuple(area.positions[v]))


def test_backtracing_identity():
    _, _, area = _room_area()
    p = tuple(area.positions[40])
    plan = plan_backtracing(area, p, p)
    assert plan.graph_path == [40]
    assert plan.cost == 0.0
    assert plan.mode == Mode.BACKTRACING


def test_backtracing_is_optimal_and_consistent():
    _, _, area = _room_area(_wall_state(row=20), reachable=False)
    rm = area.merged_roadmap
    rng = np.random.default_rng(4)
    for _ in range(20):
        s, t = rng.choice(len(rm.ids), 2, replace=False)
        ref = dijkstra_cost(len(rm.ids), rm.edges, rm.lengths, int(s), int(t))
        start, goal = tuple(area.positions[s]), tuple(area.positions[t])
        if math.isinf(ref):
            with pytest.raises(NoPath):
                plan_backtracing(area, start, goal)
            continue
        plan = plan_backtracing(area, start, goal)
        assert plan.cost == ref
        _check_plan(area, plan)


def test_backtracing_disconnected_goal():
    _, _, area = _room_area(_wall_state(row=20), reachable=False)
    below = int(np.argmin(area.positions[:, 1]))
    above = int(np.argmax(area.positions[:, 1]))
    with pytest.raises(NoPath):
        plan_backtracing(area, tuple(area.positions[below]), tuple(area.positions[above]))


def test_plan_json_roundtrip():
    _, _, area = _room_area()
    plan = plan_backtracing(area, tuple(area.positions[0]), (1.0, 1.0))
    back = Plan.from_json(plan.to_json())
    assert back.to_json() == plan.to_json()
    assert back.waypoints[-1] == (1.0, 1.0)


# -------------------------------------------------------------- exploration


def _east_frontier(pts):
    return np.abs(pts[:, 0] - pts[:, 0].max()) < 1e-9


def test_exploration_inside_local_area():
    store = SubmapStore()
    topo = GlobalTopology()
    sm = submap_at(0, odom(), frontier=_east_frontier)
    store.add(sm)
    topo.add_node(0, sm.anchor)
    area = compose_local_area(topo, store, 0, 1.5 * S)
    fr = frontier_index(store)
    state = PlannerState((20.0, 0.0))
    plan = plan_exploration(topo, area, fr, (0.05, 0.05), (20.0, 0.0), state, W, 0)
    assert plan.topology_path == [0]
    assert plan.target[0] == 0
    assert area.positions[plan.graph_path[-1]][0] == pytest.approx(sm.corrected_points()[:, 0].max())
    _check_plan(area, plan)
    assert state.last_waypoint is not None


def test_exploration_three_hops():
    centers = [odom(4.0 * i, 0.0) for i in range(4)]
    store, topo = chain(centers)
    last = store.get(3)
    last.roadmap.is_frontier[:] = _east_frontier(last.corrected_points())
    area = compose_local_area(topo, store, 0, 1.5 * S)
    assert 3 not in area.member_submap_ids
    state = PlannerState((30.0, 0.0))
    plan = plan_exploration(topo, area, frontier_index(store), (0.05, 0.05), (30.0, 0.0), state, W, 0)
    assert plan.topology_path == [0, 1, 2, 3]
    hops = len(plan.topology_path) - 1
    assert hops == 3
    cost = sum(topo.edge(a, b).length for a, b in zip(plan.topology_path, plan.topology_path[1:]))
    e = [(x.a, x.b) for x in topo.edges]
    assert cost == pytest.approx(dijkstra_cost(4, e, [x.length for x in topo.edges], 0, 3), abs=1e-12)
    # the local leg ends at the reachable vertex nearest submap 2
    end = area.positions[plan.graph_path[-1]]
    d = np.hypot(*(area.positions - topo.nodes[2].xy).T)
    assert math.hypot(*(end - topo.nodes[2].xy)) == pytest.approx(d.min())
    _check_plan(area, plan)


def test_exploration_without_frontiers():
    store, topo, area = _room_area()
    with pytest.raises(NoFrontiers):
        plan_exploration(topo, area, [], (0.05, 0.05), (9.0, 9.0), PlannerState((9.0, 9.0)), W, 0)


def test_unreachable_frontier_is_blacklisted():
    store, topo, area = _room_area(_wall_state(row=20), reachable=False)
    below = int(np.argmin(area.positions[:, 1]))
    above = int(np.argmax(area.positions[:, 1]))
    fr = [FrontierEntry(0, int(area.keys[above, 1]), tuple(area.positions[above])),
          FrontierEntry(0, int(area.keys[below, 1]) + 10_000, (0.0, -30.0))]
    state = PlannerState((0.0, 10.0))
    with pytest.raises(NoFrontiers):
        plan_exploration(topo, area, fr, tuple(area.positions[below]), (0.0, 10.0), state, W, 0)
    assert (0, int(area.keys[above, 1])) in state.blacklist


def test_planning_is_deterministic():
    centers = [odom(4.0 * i, 0.0) for i in range(4)]
    store, topo = chain(centers)
    store.get(3).roadmap.is_frontier[:] = _east_frontier(store.get(3).corrected_points())
    plans = []
    for _ in range(2):
        area = compose_local_area(topo, store, 1, 1.5 * S)
        plans.append(plan_exploration(topo, area, frontier_index(store), (4.05, 0.05), (30.0, 0.0),
                                      PlannerState((30.0, 0.0)), W, 1).to_json())
    assert plans[0] == plans[1]
