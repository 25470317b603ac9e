"""Bug-trap mission: HiTMap against a map-free greedy follower."""

import argparse
import time

from hitmap.bench.runner import run_greedy, run_scenario
from hitmap.bench.scenarios import WORLDS, config_for


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="out/bug_trap")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    cfg = config_for("bug_trap", seed=args.seed, snapshot_every=200)
    world = WORLDS["bug_trap"]()
    t0 = time.perf_counter()
    hit = run_scenario(cfg, args.out_dir, world)
    print(f"hitmap: {hit.outcome.value} in {hit.frames} frames ({time.perf_counter() - t0:.1f} s)")
    greedy = run_greedy(cfg, world)
    x, y = greedy.trajectory[-1]
    print(f"greedy: {greedy.outcome.value} in {greedy.frames} frames, ended at ({x:.2f}, {y:.2f})")


if __name__ == "__main__":
    main()
