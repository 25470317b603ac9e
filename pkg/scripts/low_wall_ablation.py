"""Low-wall scenario with and without loop validation."""

import argparse
from pathlib import Path

from hitmap.bench.runner import run_scenario
from hitmap.bench.scenarios import WORLDS, config_for


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="out/low_wall")
    args = p.parse_args()
    world = WORLDS["low_wall"]()
    for label, validate in (("validated", True), ("unchecked", False)):
        cfg = config_for("low_wall", loop_validation=validate)
        res = run_scenario(cfg, Path(args.out_dir) / label, world)
        kinds = {}
        for e in res.events:
            if e["kind"].startswith("loop"):
                kinds[e["kind"]] = kinds.get(e["kind"], 0) + 1
        x, y = res.trajectory[-1]
        print(f"{label:9s} {res.outcome.value:8s} frames={res.frames} loops={kinds} "
              f"final=({x:.2f}, {y:.2f}) {res.reason}")


if __name__ == "__main__":
    main()
