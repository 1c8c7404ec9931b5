"""Demonstration datasets: collection, persistence and statistics.

Samples store the observation (raster quantized to 1/255 steps), the
expert's intended pre-noise action as the label, the command pair, and
episode metadata including the executed action so an episode can be
re-simulated exactly. Only successful episodes that pass the control
quality gate are kept.

Files are JSON Lines: a header line, then for each trajectory one metadata
line followed by its sample lines (raster payload base64). Reading back a
written dataset reproduces it bit-exactly.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench
from .controllers import ExpertController
from .decision import LAT_NAMES, LON_NAMES, LatCmd, LonCmd
from .observe import TRAIN_WEATHERS, WEATHERS, Observation
from .scene import TRAIN_SCENES, build_scene, catalog_hash
from .world import EVENT_SUCCESS

SCHEMA_VERSION = 1

QUALITY_MAX_DEV_WAYPOINT = 0.8
MIN_SCENE_SUCCESS = 0.5
VAL_FRACTION = 6  # one validation trajectory per ~6 collected


@dataclass
class SampleMeta:
    scene_id: int
    route_id: int
    weather: str
    tick: int
    seed: int
    executed: tuple[float, float]


@dataclass
class Sample:
    raster_q: np.ndarray            # (5, 48, 48) uint8
    speed: float
    action: tuple[float, float]     # intended, pre-noise label
    lat: int
    lon: int
    meta: SampleMeta

    def observation(self) -> Observation:
        return Observation(raster=self.raster_q.astype(np.float64) / 255.0,
                           ego_speed=self.speed)


@dataclass
class Trajectory:
    samples: list[Sample]
    terminal: str
    quality: dict
    split: str
    scene_id: int
    route_id: int
    weather: str
    seed: int


@dataclass
class Dataset:
    trajectories: list[Trajectory]
    catalog_hash: str

    def frames(self) -> int:
        return sum(len(t.samples) for t in self.trajectories)

    def by_split(self, split: str) -> list[Trajectory]:
        return [t for t in self.trajectories if t.split == split]


def _episode_quality(result: bench.EpisodeResult,
                     intended: list[tuple[float, float]]) -> dict:
    # Jerk is judged on the intended labels: injected steering noise may
    # push an executed action past the threshold without spoiling the label.
    jerk = sum(1 for s, a in intended
               if abs(s) > bench.JERK_THRESHOLD or abs(a) > bench.JERK_THRESHOLD)
    return {
        "ego_jerk": float(jerk),
        "other_jerk": float(result.disruption_events),
        "dev_waypoint": bench.dev_waypoint([result]),
        "dev_destination": bench.dev_destination([result]),
        "heading_dev": bench.heading_dev([result]),
        "total_steps": float(result.steps),
    }


def quality_gate(quality: dict) -> bool:
    return (quality["ego_jerk"] <= 0.0
            and quality["dev_waypoint"] <= QUALITY_MAX_DEV_WAYPOINT)


def steps_to_samples(steps: list[bench.RecordedStep], scene_id: int,
                     route_id: int, weather: str, seed: int) -> list[Sample]:
    return [
        Sample(raster_q=s.raster_q, speed=s.speed, action=s.intended,
               lat=s.lat, lon=s.lon,
               meta=SampleMeta(scene_id=scene_id, route_id=route_id,
                               weather=weather, tick=s.tick, seed=seed,
                               executed=s.executed))
        for s in steps
    ]


def _val_indices(n: int) -> set[int]:
    """Evenly spread validation picks at a ~5:1 train/val ratio."""
    n_val = max(1, int(n / VAL_FRACTION + 0.5)) if n > 1 else 0
    if n_val == 0:
        return set()
    picks = set()
    for j in range(n_val):
        picks.add(min(n - 1, int((j + 0.5) * n / n_val)))
    return picks


def collect(scene_ids: list[int], episodes_per_route: int, noise_p: float,
            seed: int, progress: bool = False) -> Dataset:
    """Closed-loop expert collection over the given scenes.

    Draws a train weather per episode, injects steering noise with
    probability ``noise_p``, keeps only successful episodes passing the
    quality gate, and tags train/val splits at ~5:1 within train scenes.
    Aborts when the expert's success rate over a scene falls under 50%,
    which signals a broken environment rather than bad luck.
    """
    if not scene_ids:
        raise ValueError("collect needs at least one scene id")
    controller = ExpertController()
    trajectories: list[Trajectory] = []
    for sid in sorted(scene_ids):
        scene = build_scene(sid)
        attempts = successes = 0
        for route in scene.routes:
            for k in range(episodes_per_route):
                ep_seed = bench.episode_seed(seed, sid, route.route_id, k)
                rng = np.random.default_rng(
                    bench.episode_seed(seed, sid, route.route_id, k, 9))
                weather_name = TRAIN_WEATHERS[int(rng.integers(
                    0, len(TRAIN_WEATHERS)))]
                weather = WEATHERS[weather_name]
                result, steps = bench.rollout(
                    scene, route.route_id, weather, ep_seed, controller,
                    noise_p=noise_p, record=True)
                attempts += 1
                if result.terminal != EVENT_SUCCESS:
                    continue
                successes += 1
                quality = _episode_quality(result, [s.intended for s in steps])
                if not quality_gate(quality):
                    continue
                trajectories.append(Trajectory(
                    samples=steps_to_samples(steps, sid, route.route_id,
                                             weather_name, ep_seed),
                    terminal=result.terminal, quality=quality,
                    split="test" if scene.split == "test" else "train",
                    scene_id=sid, route_id=route.route_id,
                    weather=weather_name, seed=ep_seed))
            if progress:
                print(f"scene {sid} route {route.route_id}: "
                      f"{successes}/{attempts} successes")
        if attempts and successes / attempts < MIN_SCENE_SUCCESS:
            raise RuntimeError(
                f"expert success rate {successes}/{attempts} on scene {sid} "
                f"is below {MIN_SCENE_SUCCESS:.0%}; the environment or the "
                f"expert configuration is broken")

    train_pool = [i for i, t in enumerate(trajectories) if t.split == "train"]
    val_picks = _val_indices(len(train_pool))
    for j, i in enumerate(train_pool):
        if j in val_picks:
            trajectories[i].split = "val"
    return Dataset(trajectories=trajectories, catalog_hash=catalog_hash())


def write_dataset(path: str | Path, dataset: Dataset) -> None:
    path = Path(path)
    with path.open("w") as f:
        header = {"type": "header", "schema_version": SCHEMA_VERSION,
                  "catalog_hash": dataset.catalog_hash,
                  "trajectories": len(dataset.trajectories)}
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for t in dataset.trajectories:
            meta = {"type": "trajectory", "split": t.split,
                    "terminal": t.terminal, "quality": t.quality,
                    "scene_id": t.scene_id, "route_id": t.route_id,
                    "weather": t.weather, "seed": t.seed,
                    "n_samples": len(t.samples)}
            f.write(json.dumps(meta, sort_keys=True) + "\n")
            for s in t.samples:
                line = {"type": "sample", "tick": s.meta.tick,
                        "speed": s.speed,
                        "action": [s.action[0], s.action[1]],
                        "executed": [s.meta.executed[0], s.meta.executed[1]],
                        "cmds": [s.lat, s.lon],
                        "raster": base64.b64encode(
                            s.raster_q.tobytes()).decode("ascii")}
                f.write(json.dumps(line, sort_keys=True) + "\n")


class DatasetIOError(RuntimeError):
    pass


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise DatasetIOError(f"{path}: empty dataset file")

    def parse(i: int) -> dict:
        try:
            return json.loads(lines[i])
        except json.JSONDecodeError as e:
            raise DatasetIOError(f"{path}: corrupt JSON at line {i + 1}: {e}")

    header = parse(0)
    if header.get("type") != "header":
        raise DatasetIOError(f"{path}: line 1 is not a dataset header")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise DatasetIOError(
            f"{path}: schema version {header.get('schema_version')!r} "
            f"unsupported (expected {SCHEMA_VERSION})")

    trajectories = []
    i = 1
    while i < len(lines):
        meta = parse(i)
        if meta.get("type") != "trajectory":
            raise DatasetIOError(
                f"{path}: expected a trajectory line at line {i + 1}")
        n = meta["n_samples"]
        if i + n > len(lines) - 1:
            raise DatasetIOError(
                f"{path}: truncated file, trajectory at line {i + 1} "
                f"promises {n} samples but the file ends at line {len(lines)}")
        samples = []
        for j in range(n):
            row = parse(i + 1 + j)
            if row.get("type") != "sample":
                raise DatasetIOError(
                    f"{path}: expected a sample line at line {i + 2 + j}")
            raw = base64.b64decode(row["raster"])
            raster = np.frombuffer(raw, dtype=np.uint8).reshape(5, 48, 48).copy()
            samples.append(Sample(
                raster_q=raster, speed=row["speed"],
                action=(row["action"][0], row["action"][1]),
                lat=row["cmds"][0], lon=row["cmds"][1],
                meta=SampleMeta(scene_id=meta["scene_id"],
                                route_id=meta["route_id"],
                                weather=meta["weather"], tick=row["tick"],
                                seed=meta["seed"],
                                executed=(row["executed"][0],
                                          row["executed"][1]))))
        trajectories.append(Trajectory(
            samples=samples, terminal=meta["terminal"],
            quality=meta["quality"], split=meta["split"],
            scene_id=meta["scene_id"], route_id=meta["route_id"],
            weather=meta["weather"], seed=meta["seed"]))
        i += 1 + n
    return Dataset(trajectories=trajectories,
                   catalog_hash=header["catalog_hash"])


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    if a.catalog_hash != b.catalog_hash:
        return False
    if len(a.trajectories) != len(b.trajectories):
        return False
    for ta, tb in zip(a.trajectories, b.trajectories):
        if (ta.terminal, ta.split, ta.scene_id, ta.route_id, ta.weather,
                ta.seed, ta.quality) != (tb.terminal, tb.split, tb.scene_id,
                                         tb.route_id, tb.weather, tb.seed,
                                         tb.quality):
            return False
        if len(ta.samples) != len(tb.samples):
            return False
        for sa, sb in zip(ta.samples, tb.samples):
            if (sa.speed, sa.action, sa.lat, sa.lon, sa.meta.tick,
                    sa.meta.executed) != (sb.speed, sb.action, sb.lat, sb.lon,
                                          sb.meta.tick, sb.meta.executed):
                return False
            if not np.array_equal(sa.raster_q, sb.raster_q):
                return False
    return True


MISSION_BY_ROUTE_CACHE: dict[tuple[int, int], str] = {}


def _mission_of(scene_id: int, route_id: int) -> str:
    key = (scene_id, route_id)
    if key not in MISSION_BY_ROUTE_CACHE:
        scene = build_scene(scene_id)
        for r in scene.routes:
            MISSION_BY_ROUTE_CACHE[(scene_id, r.route_id)] = r.mission
    return MISSION_BY_ROUTE_CACHE[key]


def summarize(dataset: Dataset) -> dict:
    """Frame (trajectory) counts by scene, mission, and command, mirroring
    the dataset statistics table layout."""
    by_scene: dict[int, list[int]] = {}
    by_mission: dict[str, list[int]] = {}
    by_lat: dict[str, int] = {name: 0 for name in LAT_NAMES.values()}
    by_lon: dict[str, int] = {name: 0 for name in LON_NAMES.values()}
    for t in dataset.trajectories:
        n = len(t.samples)
        sc = by_scene.setdefault(t.scene_id, [0, 0])
        sc[0] += n
        sc[1] += 1
        mission = _mission_of(t.scene_id, t.route_id)
        ms = by_mission.setdefault(mission, [0, 0])
        ms[0] += n
        ms[1] += 1
        for s in t.samples:
            by_lat[LAT_NAMES[LatCmd(s.lat)]] += 1
            by_lon[LON_NAMES[LonCmd(s.lon)]] += 1
    return {
        "frames": dataset.frames(),
        "trajectories": len(dataset.trajectories),
        "by_scene": {k: tuple(v) for k, v in sorted(by_scene.items())},
        "by_mission": {k: tuple(v) for k, v in by_mission.items()},
        "by_lat_cmd": by_lat,
        "by_lon_cmd": by_lon,
    }


def to_arrays(dataset: Dataset, splits: tuple[str, ...]):
    """Stack samples from the given splits into training arrays.

    Rasters stay uint8; convert per minibatch to keep memory flat.
    Returns (rasters, speeds, lat, lon, targets).
    """
    samples = [s for t in dataset.trajectories if t.split in splits
               for s in t.samples]
    if not samples:
        raise ValueError(f"no samples in splits {splits}")
    rasters = np.stack([s.raster_q for s in samples])
    speeds = np.array([s.speed for s in samples])
    lat = np.array([s.lat for s in samples], dtype=np.int64)
    lon = np.array([s.lon for s in samples], dtype=np.int64)
    targets = np.array([[s.action[0], s.action[1]] for s in samples])
    return rasters, speeds, lat, lon, targets
