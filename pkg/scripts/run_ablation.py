"""Ablation grid over control mode, loss weighting and augmentation.

Trains each variant on one shared dataset and prints a combined report
table per condition, mirroring the benchmark's ablation layout.

    python scripts/run_ablation.py --episodes-per-route 6 --epochs 8
"""

import argparse
import time
from pathlib import Path

from fourway import bench, dataset as ds, policy, training
from fourway.controllers import LearnedController

GRID = [
    ("single", {}, "single"),
    ("single", {"augmentation": False}, "single\\aug"),
    ("single_speed", {}, "single+speed"),
    ("multitask_fixed", {}, "mt+fixed"),
    ("multitask_fixed", {"augmentation": False}, "mt+fixed\\aug"),
    ("multitask_adaptive", {}, "mt+adaptive"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes-per-route", type=int, default=6)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--eval-episodes-per-route", type=int, default=2)
    ap.add_argument("--conditions", nargs="+", default=["TT", "tt"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/ablation.txt")
    args = ap.parse_args()

    data = ds.collect([0, 1, 3, 4], args.episodes_per_route, 0.1, args.seed)
    print(f"shared dataset: {len(data.trajectories)} trajectories, "
          f"{data.frames()} frames")

    reports = []
    for preset_name, overrides, tag in GRID:
        cfg = policy.preset(preset_name, max_epochs=args.epochs, **overrides)
        t0 = time.time()
        store, _hist = training.train(data, cfg, args.seed)
        print(f"{tag}: trained in {time.time() - t0:.0f}s")
        controller = LearnedController(store, cfg)
        for condition in args.conditions:
            reports.append(bench.evaluate(
                controller, condition, args.eval_episodes_per_route,
                args.seed + 1, model_tag=tag))

    table = bench.render_report(reports)
    print(table)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table + "\n")


if __name__ == "__main__":
    main()
