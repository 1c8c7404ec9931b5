"""End-to-end pipeline demo at a reduced scale: collect demonstrations,
train the adaptive multitask policy, evaluate it on all three benchmark
conditions, and print the report table.

    python scripts/run_pipeline.py --workdir out/ --episodes-per-route 4
"""

import argparse
import json
import time
from pathlib import Path

from fourway import bench, dataset as ds, policy, training
from fourway.controllers import LearnedController
from fourway.nn.checkpoint import save_params


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="out")
    ap.add_argument("--episodes-per-route", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--eval-episodes-per-route", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    data = ds.collect([0, 1, 3, 4], args.episodes_per_route, 0.1, args.seed)
    ds.write_dataset(work / "demos.jsonl", data)
    print(f"collected {len(data.trajectories)} trajectories "
          f"({data.frames()} frames) in {time.time() - t0:.0f}s")
    print(json.dumps(ds.summarize(data)["by_lon_cmd"], indent=None))

    cfg = policy.preset("multitask_adaptive", max_epochs=args.epochs)
    t0 = time.time()
    store, hist = training.train(data, cfg, args.seed, verbose=True)
    print(f"trained in {time.time() - t0:.0f}s, best epoch {hist.best_epoch}")
    save_params(work / "policy.json", store, meta={"config": cfg.to_dict()})

    controller = LearnedController(store, cfg)
    reports = []
    for condition in ("TT", "tT", "tt"):
        reports.append(bench.evaluate(
            controller, condition, args.eval_episodes_per_route,
            args.seed + 1, model_tag="mt-adaptive"))
    print(bench.render_report(reports))
    (work / "reports.json").write_text(
        json.dumps([json.loads(bench.report_to_json(r)) for r in reports]))


if __name__ == "__main__":
    main()
