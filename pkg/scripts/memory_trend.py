"""Active and total memory per frame on the corridor loop, HiTMap vs the baseline.

Writes memory_trend.csv and memory_trend.png into the output directory.
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from hitmap.bench.baseline import run_baseline
from hitmap.bench.metrics import tail_slope
from hitmap.bench.runner import run_scenario
from hitmap.bench.scenarios import WORLDS, config_for

SERIES = [("hitmap active", (30, 110, 220)), ("hitmap total", (140, 180, 240)), ("baseline total", (220, 60, 40))]


def plot(series: list[np.ndarray], path: Path, size=(640, 360)) -> None:
    w, h = size
    img = Image.new("RGB", size, (255, 255, 255))
    draw = ImageDraw.Draw(img)
    top = max(float(s.max()) for s in series) or 1.0
    n = max(len(s) for s in series)
    for s, (label, color) in zip(series, SERIES):
        xs = np.arange(len(s)) * (w - 20) / max(n - 1, 1) + 10
        ys = h - 10 - s / top * (h - 40)
        draw.line(list(zip(xs.tolist(), ys.tolist())), fill=color, width=2)
    for i, (label, color) in enumerate(SERIES):
        draw.text((14, 6 + 12 * i), label, fill=color)
    img.save(path)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="out/memory_trend")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    out = Path(args.out_dir)
    cfg = config_for("corridor_loop", seed=args.seed)
    world = WORLDS["corridor_loop"]()
    hit = run_scenario(cfg, out / "hitmap", world)
    base = run_baseline(cfg, out / "baseline", world)
    active = np.array([m.active_memory_bytes for m in hit.metrics], dtype=float)
    total = np.array([m.total_memory_bytes for m in hit.metrics], dtype=float)
    btotal = np.array([m.total_memory_bytes for m in base.metrics], dtype=float)
    with (out / "memory_trend.csv").open("w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["frame", "hitmap_active", "hitmap_total", "baseline_total"])
        for i in range(max(len(active), len(btotal))):
            row = [i]
            for s in (active, total, btotal):
                row.append(int(s[i]) if i < len(s) else "")
            wr.writerow(row)
    plot([active, total, btotal], out / "memory_trend.png")
    a_slope, a_mean = tail_slope(active)
    b_slope, _ = tail_slope(btotal)
    print(f"hitmap   {hit.outcome.value:8s} frames={hit.frames} active slope={a_slope:.2f} B/frame "
          f"({100 * abs(a_slope) / a_mean:.3f}% of mean)")
    print(f"baseline {base.outcome.value:8s} frames={base.frames} total slope={b_slope:.2f} B/frame")


if __name__ == "__main__":
    main()
