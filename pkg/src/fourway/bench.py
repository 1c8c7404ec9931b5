"""Closed-loop benchmark: episode rollouts, terminal-event rates, and the
control-quality metrics.

Rates over N episodes: success (SR), poor end pose (PR), timeout (TR), lane
invasion (LR), collision (CR); they partition the episodes and sum to 1.

Quality metrics: ego jerk counts |action| > 0.9 events, other jerk counts
pedestrian disruptions, plus waypoint deviation, destination deviation,
final heading deviation and mean episode length.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .decision import CommandPair, OffRouteError, commands
from .geometry import Vec2, heading_to_dir, wrap_angle
from .observe import (Observation, WEATHERS, WeatherProfile, TRAIN_WEATHERS,
                      TEST_WEATHERS, render_observation)
from .scene import (Route, SceneSpec, TEST_SCENES, TRAIN_SCENES, build_scene)
from .world import (EVENT_COLLISION, EVENT_LANE_INVASION, EVENT_SUCCESS,
                    MAX_TICKS, WorldState, clip_action, detect_terminal,
                    spawn_episode, step_world)

JERK_THRESHOLD = 0.9

CONDITIONS = {
    "TT": (TRAIN_SCENES, TRAIN_WEATHERS, "train-scene/train-weather"),
    "tT": (TEST_SCENES, TRAIN_WEATHERS, "test-scene/train-weather"),
    "tt": (TEST_SCENES, TEST_WEATHERS, "test-scene/test-weather"),
}


@dataclass
class RecordedStep:
    tick: int
    raster_q: np.ndarray       # (5, 48, 48) uint8, raster * 255
    speed: float
    lat: int
    lon: int
    intended: tuple[float, float]
    executed: tuple[float, float]


@dataclass
class EpisodeResult:
    terminal: str
    steps: int
    actions: list[tuple[float, float]]
    poses: list[tuple[float, float, float]]
    disruption_events: int
    final_position: tuple[float, float]
    final_heading: float
    goal: tuple[float, float]
    goal_lane_direction: float
    waypoint_pairs: list[tuple[tuple[float, float], tuple[float, float]]]
    note: str = ""


def episode_seed(seed: int, *tags: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(t) for t in tags]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _nearest_waypoint_pair(route: Route, p: Vec2):
    pts = route.waypoints
    best_i = 0
    best_d = math.inf
    for i, wp in enumerate(pts):
        d = (wp.x - p.x) ** 2 + (wp.y - p.y) ** 2
        if d < best_d:
            best_d = d
            best_i = i
    if best_i == len(pts) - 1:
        best_i -= 1
    a, b = pts[best_i], pts[best_i + 1]
    return ((a.x, a.y), (b.x, b.y))


def rollout(scene: SceneSpec, route_id: int, weather: WeatherProfile,
            seed: int, controller, noise_p: float = 0.0,
            record: bool = False,
            max_ticks: int = MAX_TICKS):
    """Run one closed-loop episode.

    Per tick: render observation, compute rule-based commands, query the
    controller, clip, optionally perturb the executed steering, step the
    world, then check for a terminal event. Returns (EpisodeResult, steps)
    where steps is the recorded sample list when ``record`` is set.
    """
    from .expert import inject_noise  # deferred: expert also imports decision

    world = spawn_episode(scene, route_id, weather, seed)
    route = world.route
    rng_obs = np.random.default_rng(episode_seed(seed, 1))
    rng_noise = np.random.default_rng(episode_seed(seed, 2))

    actions: list[tuple[float, float]] = []
    poses: list[tuple[float, float, float]] = []
    wp_pairs = []
    recorded: list[RecordedStep] = [] if record else None
    disruptions = 0
    prev_flags = {p.id: p.disrupted for p in world.pedestrians}
    terminal = None
    note = ""

    while True:
        obs = render_observation(world, weather, rng_obs)
        try:
            cmds = commands(world, route)
            action = controller.act(obs, cmds, world, route)
        except OffRouteError as e:
            terminal = EVENT_LANE_INVASION
            note = f"off route: {e}"
            break
        if not (math.isfinite(action[0]) and math.isfinite(action[1])):
            terminal = EVENT_COLLISION
            note = f"non-finite policy output {action!r}"
            break
        intended = clip_action(*action)
        if noise_p > 0.0:
            executed = inject_noise(intended, rng_noise, noise_p)
        else:
            executed = intended
        if record:
            recorded.append(RecordedStep(
                tick=world.tick,
                raster_q=np.round(obs.raster * 255.0).astype(np.uint8),
                speed=obs.ego_speed, lat=int(cmds.lat), lon=int(cmds.lon),
                intended=intended, executed=executed))
        world = step_world(world, executed)
        for p in world.pedestrians:
            if p.disrupted and not prev_flags[p.id]:
                disruptions += 1
            prev_flags[p.id] = p.disrupted
        actions.append(executed)
        poses.append((world.ego.pose.position.x, world.ego.pose.position.y,
                      world.ego.pose.heading))
        wp_pairs.append(_nearest_waypoint_pair(route, world.ego.pose.position))
        terminal = detect_terminal(world, route)
        if terminal is None and world.tick >= max_ticks:
            terminal = "Timeout"
        if terminal is not None:
            break

    ego = world.ego
    result = EpisodeResult(
        terminal=terminal, steps=world.tick, actions=actions, poses=poses,
        disruption_events=disruptions,
        final_position=(ego.pose.position.x, ego.pose.position.y),
        final_heading=ego.pose.heading,
        goal=(route.goal.x, route.goal.y),
        goal_lane_direction=route.goal_lane_direction,
        waypoint_pairs=wp_pairs, note=note)
    return result, recorded


def run_episode(controller, scene: SceneSpec, route_id: int,
                weather: WeatherProfile, seed: int) -> EpisodeResult:
    result, _ = rollout(scene, route_id, weather, seed, controller)
    return result


def ego_jerk(results: list[EpisodeResult]) -> float:
    """Mean per-episode count of |steer| > 0.9 or |accel| > 0.9 actions."""
    _require(results)
    total = sum(
        sum(1 for s, a in r.actions
            if abs(s) > JERK_THRESHOLD or abs(a) > JERK_THRESHOLD)
        for r in results)
    return total / len(results)


def other_jerk(results: list[EpisodeResult]) -> float:
    """Mean per-episode count of pedestrian disruption events."""
    _require(results)
    return sum(r.disruption_events for r in results) / len(results)


def dev_waypoint(results: list[EpisodeResult]) -> float:
    """Mean absolute perpendicular distance to the nearest waypoint segment,
    averaged within each episode and then across episodes."""
    _require(results)
    per_episode = []
    for r in results:
        vals = []
        for (x, y, _h), (wc, wn) in zip(r.poses, r.waypoint_pairs):
            ex, ey = wn[0] - wc[0], wn[1] - wc[1]
            seg = math.hypot(ex, ey)
            if seg <= 1e-12:
                warnings.warn("degenerate waypoint pair skipped")
                continue
            cross = ex * (y - wc[1]) - ey * (x - wc[0])
            vals.append(abs(cross) / seg)
        per_episode.append(sum(vals) / len(vals) if vals else 0.0)
    return sum(per_episode) / len(per_episode)


def dev_destination(results: list[EpisodeResult]) -> float:
    _require(results)
    return sum(
        math.hypot(r.final_position[0] - r.goal[0],
                   r.final_position[1] - r.goal[1])
        for r in results) / len(results)


def heading_dev(results: list[EpisodeResult]) -> float:
    """Mean |final heading - goal lane direction|, wrapped to [0, 180] deg."""
    _require(results)
    total = sum(
        abs(math.degrees(wrap_angle(r.final_heading - r.goal_lane_direction)))
        for r in results)
    return total / len(results)


def total_steps(results: list[EpisodeResult]) -> float:
    _require(results)
    return sum(r.steps for r in results) / len(results)


def _require(results) -> None:
    if not results:
        raise ValueError("metrics need at least one episode")


@dataclass
class BenchmarkReport:
    condition: str
    model_tag: str
    episodes: int
    success_rate: float
    poor_pose_rate: float
    timeout_rate: float
    invasion_rate: float
    collision_rate: float
    ego_jerk: float
    other_jerk: float
    dev_waypoint: float
    dev_destination: float
    heading_dev: float
    total_steps: float

    def rates(self) -> dict[str, float]:
        return {"SR": self.success_rate, "PR": self.poor_pose_rate,
                "TR": self.timeout_rate, "LR": self.invasion_rate,
                "CR": self.collision_rate}


def summarize_results(results: list[EpisodeResult], condition: str,
                      model_tag: str) -> BenchmarkReport:
    _require(results)
    n = len(results)
    counts = {"Success": 0, "PoorEndPose": 0, "Timeout": 0,
              "LaneInvasion": 0, "Collision": 0}
    for r in results:
        counts[r.terminal] += 1
    return BenchmarkReport(
        condition=condition, model_tag=model_tag, episodes=n,
        success_rate=counts["Success"] / n,
        poor_pose_rate=counts["PoorEndPose"] / n,
        timeout_rate=counts["Timeout"] / n,
        invasion_rate=counts["LaneInvasion"] / n,
        collision_rate=counts["Collision"] / n,
        ego_jerk=ego_jerk(results),
        other_jerk=other_jerk(results),
        dev_waypoint=dev_waypoint(results),
        dev_destination=dev_destination(results),
        heading_dev=heading_dev(results),
        total_steps=total_steps(results))


def evaluate(controller, condition: str, episodes_per_route: int, seed: int,
             model_tag: str = "model") -> BenchmarkReport:
    """Episodic protocol over a benchmark condition (TT, tT or tt)."""
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be one of {sorted(CONDITIONS)}")
    scene_ids, weather_names, tag = CONDITIONS[condition]
    results = []
    for sid in scene_ids:
        scene = build_scene(sid)
        for route in scene.routes:
            for k in range(episodes_per_route):
                ep_seed = episode_seed(seed, sid, route.route_id, k)
                rng = np.random.default_rng(episode_seed(seed, sid,
                                                         route.route_id, k, 9))
                weather = WEATHERS[weather_names[int(rng.integers(
                    0, len(weather_names)))]]
                results.append(run_episode(controller, scene, route.route_id,
                                           weather, ep_seed))
    return summarize_results(results, tag, model_tag)


REPORT_VERSION = 1


def report_to_json(report: BenchmarkReport) -> str:
    return json.dumps({"version": REPORT_VERSION, "report": asdict(report)},
                      sort_keys=True)


def report_from_json(text: str) -> BenchmarkReport:
    doc = json.loads(text)
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')!r}")
    return BenchmarkReport(**doc["report"])


_RATE_COLS = ["SR", "PR", "TR", "LR", "CR"]
_METRIC_COLS = ["EgoJerk", "OtherJerk", "DevWp", "DevDest", "HeadDev", "Steps"]


def render_report(reports) -> str:
    """Fixed-width table; rates in percent (1 decimal), metrics 3 decimals."""
    if isinstance(reports, BenchmarkReport):
        reports = [reports]
    if not reports:
        raise ValueError("no reports to render")
    for r in reports:
        if not r.model_tag:
            raise ValueError("report is missing a model tag")
    header = (f"{'Condition':<28}{'Model':<22}"
              + "".join(f"{c:>7}" for c in _RATE_COLS)
              + "".join(f"{c:>11}" for c in _METRIC_COLS))
    lines = [header, "-" * len(header)]
    for r in reports:
        rates = r.rates()
        line = (f"{r.condition:<28}{r.model_tag:<22}"
                + "".join(f"{100.0 * rates[c]:>7.1f}" for c in _RATE_COLS)
                + f"{r.ego_jerk:>11.3f}{r.other_jerk:>11.3f}"
                + f"{r.dev_waypoint:>11.3f}{r.dev_destination:>11.3f}"
                + f"{r.heading_dev:>11.3f}{r.total_steps:>11.3f}")
        lines.append(line)
    return "\n".join(lines)
