"""Mission length and exploration-waypoint switches across shift-cost weights."""

import argparse
import math

from hitmap.bench.runner import HiTMapMission
from hitmap.bench.scenarios import WORLDS, config_for


def run(cfg, world):
    mission = HiTMapMission(cfg, world)
    switches = 0
    prev = None
    outcome, frame = None, 0
    for frame in range(cfg.frames):
        _, outcome, _ = mission.step_frame(frame)
        key = mission.pstate.waypoint_key
        if key is not None and prev is not None and key != prev:
            switches += 1
        prev = key if key is not None else prev
        if outcome is not None:
            break
    traj = mission.trajectory
    length = sum(math.dist(a, b) for a, b in zip(traj, traj[1:]))
    return (outcome.value if outcome else "Timeout"), frame + 1, length, switches


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default="bug_trap", choices=sorted(WORLDS))
    p.add_argument("--wl", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.4])
    args = p.parse_args()
    world = WORLDS[args.scenario]()
    print(f"{'w_d':>5} {'w_l':>5} {'outcome':>8} {'frames':>7} {'path_m':>8} {'switches':>9}")
    for wl in args.wl:
        cfg = config_for(args.scenario, w_d=1.0 - wl, w_l=wl)
        outcome, frames, length, switches = run(cfg, world)
        print(f"{1.0 - wl:5.2f} {wl:5.2f} {outcome:>8} {frames:7d} {length:8.2f} {switches:9d}")


if __name__ == "__main__":
    main()
