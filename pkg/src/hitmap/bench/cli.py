"""Command-line entry point: ``hitmap run | baseline | render | compare``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from hitmap.bench.config import ScenarioConfig
from hitmap.bench.metrics import read_metrics, tail_slope
from hitmap.bench.runner import EXIT_CODES
from hitmap.bench.scenarios import WORLDS, config_for
from hitmap.errors import ConfigError, HiTMapError
from hitmap.planner import CostWeights


def _mission_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--world", help="world file (ASCII or JSON) or a built-in name: " + ", ".join(WORLDS))
    p.add_argument("--config", help="JSON file mirroring ScenarioConfig")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--frames", type=int)
    p.add_argument("--weights", help="exploration weights as 'wd,wl'")
    p.add_argument("--disable-loop-validation", action="store_true",
                   help="trust every detected loop without checking connectivity")
    p.add_argument("--snapshot-every", type=int, help="also write snapshot_NNNNN.png every N frames")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hitmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _mission_args(sub.add_parser("run", help="run a HiTMap mission"))
    _mission_args(sub.add_parser("baseline", help="run the global-grid baseline on the same mission"))
    r = sub.add_parser("render", help="draw a saved map directory to PNG")
    r.add_argument("map_dir", help="directory holding submap_*.json and topology.json")
    r.add_argument("--out", default="snapshot.png")
    r.add_argument("--plan", help="plan.json to overlay")
    r.add_argument("--world", help="world file or built-in name, used for the image bounds")
    r.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    c = sub.add_parser("compare", help="summarize two or more metrics.jsonl runs")
    c.add_argument("runs", nargs="+", help="run directories or metrics.jsonl files")
    c.add_argument("--json", action="store_true", help="print the summary as JSON")
    return parser


def resolve_config(args) -> tuple[ScenarioConfig, object]:
    """Config from --config and --world, then the remaining flag overrides."""
    world = None
    if args.config:
        cfg = ScenarioConfig.load(args.config)
        if args.world in WORLDS:
            world = WORLDS[args.world]()
        elif args.world:
            cfg = cfg.with_overrides(world=str(Path(args.world).resolve()))
    elif args.world in WORLDS:
        cfg = config_for(args.world)
        world = WORLDS[args.world]()
    elif args.world:
        cfg = ScenarioConfig.simulation(world=str(Path(args.world).resolve()))
    else:
        raise ConfigError("give --world or --config")
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.frames is not None:
        over["frames"] = args.frames
    if args.weights:
        w = CostWeights.parse(args.weights)
        over["w_d"], over["w_l"] = w.w_d, w.w_l
    if args.disable_loop_validation:
        over["loop_validation"] = False
    if args.snapshot_every is not None:
        over["snapshot_every"] = args.snapshot_every
    if over:
        cfg = cfg.with_overrides(**over)
    cfg.validate()
    return cfg, world


def _run(args, baseline: bool) -> int:
    cfg, world = resolve_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    if baseline:
        from hitmap.bench.baseline import run_baseline

        res = run_baseline(cfg, out, world=world)
    else:
        from hitmap.bench.runner import run_scenario

        res = run_scenario(cfg, out, world=world)
    line = f"{res.outcome.value} after {res.frames} frames"
    if res.reason:
        line += f" ({res.reason})"
    print(line)
    return EXIT_CODES[res.outcome]


def _render(args) -> int:
    from hitmap.bench.render import image_size, render_snapshot, snapshot_from_map, world_bounds
    from hitmap.planner import Plan
    from hitmap.submaps import SubmapStore
    from hitmap.topology import GlobalTopology
    from hitmap.world import load_world

    store, topo = SubmapStore.load(args.map_dir)
    topo = topo if topo is not None else GlobalTopology()
    if args.world in WORLDS:
        bounds = world_bounds(WORLDS[args.world]())
    elif args.world:
        bounds = world_bounds(load_world(args.world))
    else:
        pts = [sm.corrected_points() for sm in store.values() if len(sm.roadmap)]
        if not pts:
            bounds = (0.0, 0.0, 1.0, 1.0)
        else:
            import numpy as np

            allp = np.concatenate(pts)
            lo, hi = allp.min(axis=0) - 1.0, allp.max(axis=0) + 1.0
            bounds = (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    plan = Plan.from_json(json.loads(Path(args.plan).read_text())) if args.plan else None
    size = tuple(args.size) if args.size else image_size(bounds)
    snap = snapshot_from_map(store, topo, bounds)
    print(render_snapshot(snap, plan, args.out, size=size))
    return 0


def _metrics_path(p: str) -> Path:
    path = Path(p)
    return path / "metrics.jsonl" if path.is_dir() else path


def summarize(records: list[dict]) -> dict:
    active = [r["active_memory_bytes"] for r in records]
    total = [r["total_memory_bytes"] for r in records]
    a_slope, a_mean = tail_slope(active)
    t_slope, t_mean = tail_slope(total)
    return {
        "frames": len(records),
        "active_slope": a_slope,
        "active_mean": a_mean,
        "total_slope": t_slope,
        "total_final": total[-1] if total else 0,
        "reintegration_cell_writes": records[-1]["reintegration_cell_writes"] if records else 0,
        "mean_frame_time": sum(r["frame_time"] for r in records) / max(len(records), 1),
    }


def _compare(args) -> int:
    rows = {}
    for p in args.runs:
        path = _metrics_path(p)
        if not path.exists():
            raise ConfigError(f"no metrics at {path}")
        rows[p] = summarize(read_metrics(path))
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True))
        return 0
    cols = ["frames", "active_slope", "active_mean", "total_slope", "total_final",
            "reintegration_cell_writes", "mean_frame_time"]
    width = max(len(p) for p in rows)
    print(" " * width + "  " + "  ".join(f"{c:>16}" for c in cols))
    for p, s in rows.items():
        cells = [f"{s[c]:>16.6g}" if isinstance(s[c], float) else f"{s[c]:>16}" for c in cols]
        print(f"{p:<{width}}  " + "  ".join(cells))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args, baseline=False)
        if args.command == "baseline":
            return _run(args, baseline=True)
        if args.command == "render":
            return _render(args)
        return _compare(args)
    except (HiTMapError, OSError, ValueError) as exc:
        print(f"hitmap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
