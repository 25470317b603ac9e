"""Write the built-in benchmark worlds and their mission configs to worlds/."""

import argparse
from pathlib import Path

from hitmap.bench.scenarios import WORLDS, config_for
from hitmap.world import save_world


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default=str(Path(__file__).resolve().parent.parent / "worlds"))
    args = p.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in WORLDS.items():
        world = make()
        # elevation only survives the JSON format
        ext = ".json" if world.elevation.any() else ".txt"
        save_world(world, out / f"{name}{ext}")
        config_for(name, world_path=f"{name}{ext}").save(out / f"{name}.config.json")
        print(f"{name}: {world.width_cells}x{world.height_cells} cells at {world.resolution} m")


if __name__ == "__main__":
    main()
