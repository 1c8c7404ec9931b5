"""Operator command line: collection, training, evaluation, reporting,
gradient checking, the teleop session server, and the catalog export.

Every subcommand ends with a single machine-parsable line of the form
``RESULT {json}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import bench, dataset as ds, policy, scene, training
from .controllers import LearnedController
from .nn.checkpoint import load_params, save_params
from .nn.gradcheck import grad_check

GRADCHECK_TOLERANCE = 1e-5


def _result(kind: str, **fields) -> None:
    print("RESULT " + json.dumps({"command": kind, **fields}, sort_keys=True))


def _fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def load_config(path: str | Path) -> policy.ModelConfig:
    """Model configuration from a TOML file with a [model] table."""
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    table = doc.get("model", doc)
    return policy.ModelConfig(**table).validate()


def cmd_collect(args) -> int:
    dataset = ds.collect(args.scenes, args.episodes_per_route,
                         args.noise_prob, args.seed, progress=args.verbose)
    ds.write_dataset(args.out, dataset)
    summary = ds.summarize(dataset)
    _result("collect", out=str(args.out),
            trajectories=summary["trajectories"], frames=summary["frames"])
    return 0


def cmd_train(args) -> int:
    if not Path(args.dataset).exists():
        return _fail(f"dataset not found: {args.dataset}")
    config = load_config(args.config) if args.config else policy.preset(
        args.preset)
    if args.max_epochs is not None:
        config.max_epochs = args.max_epochs
    dataset = ds.read_dataset(args.dataset)
    store, hist = training.train(dataset, config, args.seed,
                                 verbose=args.verbose)
    meta = {"config": config.to_dict(),
            "steer_log_var": (hist.steer_log_var[-1]
                              if hist.steer_log_var else None),
            "accel_log_var": (hist.accel_log_var[-1]
                              if hist.accel_log_var else None)}
    save_params(args.out, store, meta=meta)
    sidecar = Path(str(args.out) + ".meta.json")
    sidecar.write_text(json.dumps(
        {"config": config.to_dict(),
         "history": training.history_to_dict(hist)}, sort_keys=True))
    _result("train", out=str(args.out), epochs=len(hist.val_loss),
            best_epoch=hist.best_epoch, best_val_loss=hist.best_val_loss)
    return 0


def load_policy(checkpoint: str | Path) -> LearnedController:
    store, meta = load_params(checkpoint)
    config = policy.ModelConfig.from_dict(meta["config"])
    return LearnedController(store, config)


def cmd_evaluate(args) -> int:
    if not Path(args.checkpoint).exists():
        return _fail(f"checkpoint not found: {args.checkpoint}")
    controller = load_policy(args.checkpoint)
    tag = args.tag or Path(args.checkpoint).stem
    report = bench.evaluate(controller, args.condition,
                            args.episodes_per_route, args.seed, model_tag=tag)
    print(bench.render_report(report))
    if args.out:
        Path(args.out).write_text(bench.report_to_json(report))
    _result("evaluate", condition=args.condition,
            success_rate=report.success_rate,
            collision_rate=report.collision_rate,
            timeout_rate=report.timeout_rate, episodes=report.episodes,
            out=str(args.out) if args.out else None)
    return 0


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        if not Path(path).exists():
            return _fail(f"report not found: {path}")
        reports.append(bench.report_from_json(Path(path).read_text()))
    print(bench.render_report(reports))
    _result("report", count=len(reports))
    return 0


def cmd_gradcheck(args) -> int:
    config = load_config(args.config) if args.config else policy.preset(
        "multitask_adaptive", speed_branch=True)
    store = policy.init_policy_params(config, args.seed)
    rng = np.random.default_rng(args.seed)
    # zero-init biases leave dead-patch preactivations exactly on the relu
    # kink where subgradients are ambiguous; jitter into a generic position
    for t in store.params.values():
        t.data += rng.uniform(-0.05, 0.05, t.data.shape)
    n = 12
    rasters = rng.random((n, 5, 48, 48))
    speeds = rng.random(n) * 6.0
    lat = np.arange(n) % 4
    lon = np.arange(n) % 3
    targets = rng.uniform(-0.9, 0.9, (n, 2))

    def f(s, tape):
        return policy.batch_loss(rasters, speeds, lat, lon, targets, s,
                                 config, train=False, rng=None, tape=tape)

    err = grad_check(f, store, h=1e-6,
                     max_coords_per_param=args.coords_per_param,
                     rng=np.random.default_rng(args.seed + 1))
    ok = err < GRADCHECK_TOLERANCE
    _result("gradcheck", max_rel_error=err, tolerance=GRADCHECK_TOLERANCE,
            ok=ok)
    return 0 if ok else 1


def cmd_catalog(args) -> int:
    doc = scene.catalog()
    text = json.dumps(doc, indent=2 if args.pretty else None, sort_keys=True)
    Path(args.out).write_text(text)
    _result("catalog", out=str(args.out), hash=scene.catalog_hash())
    return 0


def cmd_serve(args) -> int:
    import asyncio

    from .server import serve

    try:
        asyncio.run(serve(
            port=args.port, out_path=args.out,
            default_scene=args.scene, default_route=args.route,
            default_weather=args.weather, default_seed=args.seed,
            tick_rate=args.tick_rate, lockstep=args.lockstep,
            noise_p=args.noise_prob))
    except KeyboardInterrupt:
        pass
    _result("serve", port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fourway",
        description="Intersection driving lab: simulator, imitation "
                    "policies, benchmark and teleop tools")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="run the scripted expert and store "
                                       "demonstrations")
    c.add_argument("--scenes", type=int, nargs="+", default=[0, 1, 3, 4])
    c.add_argument("--episodes-per-route", type=int, default=12)
    c.add_argument("--noise-prob", type=float, default=0.1)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--verbose", action="store_true")
    c.set_defaults(fn=cmd_collect)

    t = sub.add_parser("train", help="fit a policy on a dataset")
    t.add_argument("--config", help="TOML file with a [model] table")
    t.add_argument("--preset", default="multitask_adaptive",
                   choices=["single", "single_speed", "multitask_fixed",
                            "multitask_adaptive"])
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--max-epochs", type=int, default=None)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("evaluate", help="closed-loop benchmark evaluation")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--condition", choices=["TT", "tT", "tt"], default="TT")
    e.add_argument("--episodes-per-route", type=int, default=2)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--tag", default=None)
    e.add_argument("--out", default=None, help="write the report JSON here")
    e.set_defaults(fn=cmd_evaluate)

    r = sub.add_parser("report", help="render stored report JSON as a table")
    r.add_argument("reports", nargs="+")
    r.set_defaults(fn=cmd_report)

    g = sub.add_parser("gradcheck", help="finite-difference check of the "
                                         "full model gradients")
    g.add_argument("--config", default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--coords-per-param", type=int, default=40)
    g.set_defaults(fn=cmd_gradcheck)

    k = sub.add_parser("catalog", help="export the scene/route/weather "
                                       "catalog JSON")
    k.add_argument("--out", required=True)
    k.add_argument("--pretty", action="store_true")
    k.set_defaults(fn=cmd_catalog)

    s = sub.add_parser("serve", help="teleop session server (WebSocket)")
    s.add_argument("--port", type=int, default=8700)
    s.add_argument("--out", default="human_demos.jsonl")
    s.add_argument("--scene", type=int, default=0)
    s.add_argument("--route", type=int, default=0)
    s.add_argument("--weather", default="ClearNoon")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tick-rate", type=float, default=10.0)
    s.add_argument("--lockstep", action="store_true",
                   help="step only on received control messages (testing)")
    s.add_argument("--noise-prob", type=float, default=0.1)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ds.DatasetIOError, FileNotFoundError, ValueError,
            RuntimeError) as e:
        return _fail(str(e))


if __name__ == "__main__":
    raise SystemExit(main())
