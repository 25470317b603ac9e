import json
import math

import numpy as np
import pytest
from PIL import Image
from scipy import ndimage

from hitmap.bench import metrics as M
from hitmap.bench.baseline import BaselineGlobalMap, BaselineMission, grid_path, run_baseline
from hitmap.bench.cli import main
from hitmap.bench.config import ScenarioConfig
from hitmap.bench.follower import Follower
from hitmap.bench.render import PLAN, MapSnapshot, render_snapshot, snapshot_from_map
from hitmap.bench.runner import Outcome, Watchdog, run_scenario
from hitmap.bench.scenarios import WORLDS, config_for
from hitmap.errors import ConfigError
from hitmap.planner import Mode, Plan
from hitmap.world import save_world

from builders import chain, odom
from oracles import bfs_reachable, dijkstra_cost


# ------------------------------------------------------------------- config


def test_simulation_preset_matches_table():
    c = ScenarioConfig.simulation()
    assert (c.map_size, c.resolution, c.submap_interval, c.sample_interval, c.sensor_range) == (5.0, 0.1, 5.0, 0.3, 5.0)
    assert (c.w_d, c.w_l) == (0.8, 0.2)
    assert c.frames == 10_000


def test_real_world_preset_matches_table():
    c = ScenarioConfig.real_world()
    assert (c.map_size, c.resolution, c.submap_interval, c.sample_interval, c.sensor_range) == (15.0, 0.2, 10.0, 0.8, 15.0)


def test_config_json_roundtrip(tmp_path):
    c = config_for("small_loop", world_path="w.txt", seed=7)
    c.save(tmp_path / "c.json")
    back = ScenarioConfig.load(tmp_path / "c.json")
    assert back.world == str((tmp_path / "w.txt").resolve())
    back.world = c.world
    assert back == c


@pytest.mark.parametrize("bad", [
    {"resolution": 0.0}, {"sample_interval": 0.05}, {"frames": 0}, {"w_d": -1.0},
    {"robot_radius": -0.1}, {"sensor_fov_deg": 400.0}, {"connect_radius": 0.1},
])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.simulation(**bad)


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json({"bogus": 1})


# ------------------------------------------------------------------ metrics


def _record(**kw):
    rec = M.FrameMetrics(0, 10, 20, 0.001, 0, "Exploration", 3.0).to_json()
    rec.update(kw)
    return rec


def test_metrics_schema_accepts_record():
    M.validate_record(_record())


@pytest.mark.parametrize("kw", [{"mode": "Flying"}, {"frame_num": -1}, {"frame_time": "x"}, {"extra": 1},
                                {"reintegration_cell_writes": True}])
def test_metrics_schema_rejects(kw):
    with pytest.raises(ValueError):
        M.validate_record(_record(**kw))


def test_metrics_writer_appends(tmp_path):
    w = M.MetricsWriter(tmp_path / "m.jsonl")
    for i in range(3):
        w.write(_record(frame_num=i))
    w.close()
    recs = M.read_metrics(tmp_path / "m.jsonl")
    assert [r["frame_num"] for r in recs] == [0, 1, 2]


def test_tail_slope_of_line():
    slope, mean = M.tail_slope(np.arange(100) * 2.0 + 5.0)
    assert slope == pytest.approx(2.0)
    assert mean == pytest.approx(2.0 * 74.5 + 5.0)


# ------------------------------------------------------------------- render


def test_empty_render_is_blank(tmp_path):
    p = render_snapshot(None, None, tmp_path / "e.png", size=(64, 48))
    img = Image.open(p)
    assert img.size == (64, 48)
    assert np.all(np.asarray(img) == 255)


def _fixture_snapshot():
    store, topo = chain([odom(2.0, 2.0), odom(5.0, 2.5, 0.3)])
    store.get(1).roadmap.is_frontier[::11] = True
    return snapshot_from_map(store, topo, (0.0, 0.0, 8.0, 6.0), robot=(5.0, 2.5))


def test_render_is_deterministic(tmp_path):
    a = render_snapshot(_fixture_snapshot(), None, tmp_path / "a.png")
    b = render_snapshot(_fixture_snapshot(), None, tmp_path / "b.png")
    assert a.read_bytes() == b.read_bytes()


def test_plan_overlay_iff_plan(tmp_path):
    plan = Plan(Mode.BACKTRACING, [(1.0, 1.0), (4.0, 4.0), (7.0, 2.0)], [0, 1, 2], 8.0)
    without = np.asarray(Image.open(render_snapshot(_fixture_snapshot(), None, tmp_path / "a.png")))
    with_ = np.asarray(Image.open(render_snapshot(_fixture_snapshot(), plan, tmp_path / "b.png")))
    assert not np.any(np.all(without == PLAN, axis=-1))
    assert np.any(np.all(with_ == PLAN, axis=-1))


# ----------------------------------------------------------------- follower


def test_follower_drives_straight_at_target():
    v, w = Follower(0.5, 1.5).command(0.0, 0.0, 0.0, [(0.0, 0.0), (5.0, 0.0)], 0.2)
    assert v == pytest.approx(0.5)
    assert w == pytest.approx(0.0)


def test_follower_turns_in_place_when_facing_away():
    v, w = Follower(0.5, 1.5).command(0.0, 0.0, 0.0, [(-5.0, 0.0)], 0.2)
    assert v == 0.0
    assert abs(w) == pytest.approx(1.5)


def test_follower_slows_at_the_end():
    v, _ = Follower(0.5, 1.5).command(0.0, 0.0, 0.0, [(0.02, 0.0)], 0.2)
    assert v == pytest.approx(0.1)


def test_watchdog():
    wd = Watchdog(5, 0.1)
    assert not any(wd.update(0.0, 0.01 * i) for i in range(4))
    assert wd.update(0.0, 0.04)
    wd.reset()
    assert not wd.update(0.0, 0.0)


# ----------------------------------------------------------------- baseline


def test_baseline_grid_is_chunk_aligned_and_keeps_data():
    g = BaselineGlobalMap(0.1, chunk=16)
    g.ensure(3, 4, 5, 6)
    assert g.shape == (16, 16) and g.origin == (0, 0)
    g.state[5, 4] = 2
    g.ensure(-20, 0, 5, 40)
    assert g.origin == (-32, 0)
    assert g.shape == (48, 48)
    assert g.state[5, 4 + 32] == 2


def test_baseline_cell_count_monotone():
    cfg = config_for("small_loop", frames=300)
    m = BaselineMission(cfg, WORLDS["small_loop"]())
    counts = []
    for f in range(300):
        _, out, _ = m.step_frame(f)
        counts.append(m.map.cell_count)
        if out is not None:
            break
    assert counts[-1] > counts[0]
    assert all(b >= a for a, b in zip(counts, counts[1:]))


def test_grid_path_matches_dijkstra_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        blocked = rng.random((15, 15)) < 0.25
        blocked[0, 0] = blocked[-1, -1] = False
        free = ~blocked
        idx = np.arange(225).reshape(15, 15)
        edges, lengths = [], []
        for r in range(15):
            for c in range(15):
                for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                    r2, c2 = r + dr, c + dc
                    if not (0 <= r2 < 15 and 0 <= c2 < 15) or not (free[r, c] and free[r2, c2]):
                        continue
                    if dr and dc and not (free[r2, c] and free[r, c2]):
                        continue
                    edges.append((idx[r, c], idx[r2, c2]))
                    lengths.append(math.hypot(dr, dc) * 0.1)
        ref = dijkstra_cost(225, edges, lengths, 0, 224)
        cells, cost = grid_path(blocked, (0, 0), (14, 14), 0.1)
        assert cost == pytest.approx(ref, abs=1e-9)
        if cells:
            assert cells[0] == (0, 0) and cells[-1] == (14, 14)
            assert all(free[c] for c in cells)


def _true_world_cost(world, start, goal, radius):
    res = world.resolution
    blocked = ndimage.distance_transform_edt(world.cells == 0) <= radius / res + 1e-9
    s = (int(start[1] / res), int(start[0] / res))
    t = (int(goal[1] / res), int(goal[0] / res))
    _, cost = grid_path(blocked, s, t, res)
    return cost


def _path_cost(res, goal):
    traj = res.trajectory
    return sum(math.dist(a, b) for a, b in zip(traj, traj[1:])) + math.dist(traj[-1], goal)


def test_open_room_hitmap_and_baseline_costs():
    world = WORLDS["open_room"]()
    cfg = config_for("open_room")
    h = run_scenario(cfg, None, world)
    b = run_baseline(cfg, None, world)
    assert h.outcome == Outcome.REACHED and b.outcome == Outcome.REACHED
    oracle = _true_world_cost(world, cfg.start, cfg.goal, cfg.robot_radius)
    ch, cb = _path_cost(h, cfg.goal), _path_cost(b, cfg.goal)
    assert abs(ch - oracle) <= 0.1 * oracle
    assert abs(cb - oracle) <= 0.1 * oracle
    assert abs(ch - cb) <= 0.1 * min(ch, cb)
    # no second submap is needed for a 3 m mission
    assert {m.n_submaps for m in h.metrics} == {1}
    assert h.reintegration_cell_writes == 0


def test_sealed_chamber_is_stuck():
    world = WORLDS["sealed_chamber"]()
    cfg = config_for("sealed_chamber")
    res = world.resolution
    reach = bfs_reachable(world.cells == 0, (int(cfg.start[1] / res), int(cfg.start[0] / res)))
    assert not reach[int(cfg.goal[1] / res), int(cfg.goal[0] / res)]
    r = run_scenario(cfg, None, world)
    assert r.outcome == Outcome.STUCK
    assert "frontier" in r.reason


# ---------------------------------------------------------------------- cli


def test_cli_reached_writes_outputs(tmp_path, capsys):
    assert main(["run", "--world", "open_room", "--out-dir", str(tmp_path)]) == 0
    assert "Reached" in capsys.readouterr().out
    for name in ("metrics.jsonl", "timing.jsonl", "topology.json", "config.json", "snapshot_final.png"):
        assert (tmp_path / name).exists()
    assert list((tmp_path / "map").glob("submap_*.json"))
    for rec in M.read_metrics(tmp_path / "metrics.jsonl"):
        M.validate_record(rec)


def test_cli_timeout(tmp_path):
    assert main(["run", "--world", "open_room", "--frames", "3", "--out-dir", str(tmp_path)]) == 2


def test_cli_baseline(tmp_path):
    assert main(["baseline", "--world", "open_room", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["outcome"] == "Reached"


def test_cli_stuck_on_sealed_goal(tmp_path):
    from hitmap.bench.scenarios import _block, _closed
    from hitmap.world import World

    cells = _closed(4.0, 4.0, 0.1)
    _block(cells, 0.1, 2.5, 2.5, 4.0, 2.7)
    _block(cells, 0.1, 2.5, 2.5, 2.7, 3.9)
    save_world(World(cells.shape[1], cells.shape[0], 0.1, cells), tmp_path / "w.txt")
    ScenarioConfig.simulation(world="w.txt", start=(1.0, 1.0, 0.0), goal=(3.3, 3.3)).save(tmp_path / "c.json")
    code = main(["run", "--config", str(tmp_path / "c.json"), "--out-dir", str(tmp_path / "o")])
    assert code == 3


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--world", str(tmp_path / "missing.txt"), "--out-dir", str(tmp_path)]) == 1
    assert main(["run", "--out-dir", str(tmp_path)]) == 1
    assert main(["run", "--world", "open_room", "--weights", "1", "--out-dir", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_render_and_compare(tmp_path, capsys):
    run = tmp_path / "r"
    assert main(["run", "--world", "open_room", "--out-dir", str(run)]) == 0
    out = tmp_path / "snap.png"
    assert main(["render", str(run / "map"), "--out", str(out), "--plan", str(run / "plan.json"),
                 "--world", "open_room"]) == 0
    assert Image.open(out).size == (200, 200)
    capsys.readouterr()
    assert main(["compare", str(run), str(run / "metrics.jsonl"), "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2
    assert main(["compare", str(tmp_path / "nope")]) == 1
