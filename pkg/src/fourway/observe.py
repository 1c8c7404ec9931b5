"""Ego-centric semantic raster observations and weather noise regimes.

The observation is a 5x48x48 grid at 0.5 m/cell covering 24 m x 24 m ahead
of the ego, which sits at the bottom-center facing up. Channels:

  0 drivable area, 1 lane markings, 2 crosswalks, 3 pedestrians, 4 route plan

Weather acts purely on the rendered grid: additive Gaussian noise, per-cell
dropout, then a brightness bias, re-clipped to [0, 1]. Cells are snapped to
the 1/255 grid so serialized rasters round-trip bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vec2
from .world import WorldState, ped_position

GRID = 48
CELL = 0.5
N_CHANNELS = 5
CH_DRIVABLE, CH_MARKINGS, CH_CROSSWALK, CH_PEDESTRIAN, CH_ROUTE = range(5)

MARKING_HALF_WIDTH = 0.15
PED_PAINT_RADIUS = 0.7
ROUTE_PAINT_RADIUS = 0.9
ROUTE_TAIL_METERS = 10.0  # plan continues past the goal along the exit lane


@dataclass(frozen=True, slots=True)
class WeatherProfile:
    name: str
    noise_sigma: float
    channel_dropout_p: float
    brightness_bias: float
    split: str


# Noon profiles train, Sunset profiles test; each Sunset is strictly harsher
# than its Noon counterpart on every perturbation channel.
WEATHERS: dict[str, WeatherProfile] = {w.name: w for w in [
    WeatherProfile("ClearNoon", 0.0, 0.0, 0.0, "train"),
    WeatherProfile("CloudyNoon", 0.02, 0.02, -0.04, "train"),
    WeatherProfile("WetNoon", 0.04, 0.05, -0.08, "train"),
    WeatherProfile("HardRainNoon", 0.08, 0.10, -0.12, "train"),
    WeatherProfile("ClearSunset", 0.03, 0.03, -0.06, "test"),
    WeatherProfile("CloudySunset", 0.05, 0.07, -0.10, "test"),
    WeatherProfile("WetSunset", 0.07, 0.09, -0.14, "test"),
    WeatherProfile("HardRainSunset", 0.12, 0.15, -0.18, "test"),
]}

TRAIN_WEATHERS = tuple(w.name for w in WEATHERS.values() if w.split == "train")
TEST_WEATHERS = tuple(w.name for w in WEATHERS.values() if w.split == "test")


@dataclass(frozen=True, slots=True)
class Observation:
    raster: np.ndarray  # (5, 48, 48) float64 in [0, 1]
    ego_speed: float


def _cell_world_coords(world: WorldState) -> tuple[np.ndarray, np.ndarray]:
    ego = world.ego
    rows = np.arange(GRID)
    cols = np.arange(GRID)
    fwd = (47.5 - rows)[:, None] * CELL          # forward distance per row
    lat = (cols - 23.5)[None, :] * CELL          # rightward offset per col
    c, s = math.cos(ego.pose.heading), math.sin(ego.pose.heading)
    # forward axis (c, s); right axis (-s, c)
    wx = ego.pose.position.x + fwd * c - lat * s
    wy = ego.pose.position.y + fwd * s + lat * c
    return wx, wy


def ego_frame_cell(ego_pose, p: Vec2) -> tuple[int, int]:
    """Grid cell containing a world point, or (-1, -1) when out of view."""
    local = ego_pose.to_local(p)
    row = 47 - int(math.floor(local.x / CELL))
    col = int(math.floor((local.y + GRID * CELL / 2.0) / CELL))
    if 0 <= row < GRID and 0 <= col < GRID:
        return row, col
    return -1, -1


def render_base(world: WorldState) -> np.ndarray:
    """Noise-free semantic raster (binary channels)."""
    scene = world.scene
    wx, wy = _cell_world_coords(world)
    ax, ay = np.abs(wx), np.abs(wy)
    raster = np.zeros((N_CHANNELS, GRID, GRID))

    in_box = np.maximum(ax, ay) <= scene.box_half
    arm_y = (ax <= scene.road_half_width) & (ay <= scene.arm_length)
    arm_x = (ay <= scene.road_half_width) & (ax <= scene.arm_length)
    raster[CH_DRIVABLE] = (in_box | arm_y | arm_x).astype(float)

    outside = ~in_box
    marks = np.zeros((GRID, GRID), dtype=bool)
    for k in range(scene.lanes_per_direction + 1):
        line = k * scene.lane_width
        marks |= (np.abs(ax - line) <= MARKING_HALF_WIDTH) & arm_y
        marks |= (np.abs(ay - line) <= MARKING_HALF_WIDTH) & arm_x
    raster[CH_MARKINGS] = (marks & outside).astype(float)

    for cw in scene.crosswalks:
        d = cw.walk_dir()
        mid = Vec2((cw.a.x + cw.b.x) / 2.0, (cw.a.y + cw.b.y) / 2.0)
        relx, rely = wx - mid.x, wy - mid.y
        along = relx * d.x + rely * d.y
        across = relx * (-d.y) + rely * d.x
        band = (np.abs(across) <= cw.width / 2.0) & (np.abs(along) <= cw.length() / 2.0)
        raster[CH_CROSSWALK][band] = 1.0

    for ped in world.pedestrians:
        p = ped.pose.position
        if abs(p.x - world.ego.pose.position.x) > 40 or \
           abs(p.y - world.ego.pose.position.y) > 40:
            continue
        hit = (wx - p.x) ** 2 + (wy - p.y) ** 2 <= PED_PAINT_RADIUS ** 2
        raster[CH_PEDESTRIAN][hit] = 1.0

    ego_pose = world.ego.pose
    route = world.route
    tail_dir = Vec2(math.cos(route.goal_lane_direction),
                    math.sin(route.goal_lane_direction))
    plan = list(route.waypoints) + [
        route.goal + tail_dir.scaled(float(k))
        for k in range(1, int(ROUTE_TAIL_METERS) + 1)]
    for p in plan:
        local = ego_pose.to_local(p)
        if not (0.0 <= local.x < GRID * CELL and abs(local.y) < GRID * CELL / 2.0):
            continue
        row = 47 - int(math.floor(local.x / CELL))
        col = int(math.floor((local.y + GRID * CELL / 2.0) / CELL))
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = row + dr, col + dc
                if 0 <= r < GRID and 0 <= c < GRID:
                    # cell center distance to the waypoint
                    fc = (47.5 - r) * CELL
                    rc = (c - 23.5) * CELL
                    if (fc - local.x) ** 2 + (rc - local.y) ** 2 <= ROUTE_PAINT_RADIUS ** 2:
                        raster[CH_ROUTE, r, c] = 1.0
    return raster


def render_observation(world: WorldState, weather: WeatherProfile,
                       rng: np.random.Generator) -> Observation:
    """Semantic raster under a weather profile; ClearNoon is the identity."""
    raster = render_base(world)
    if weather.noise_sigma > 0.0:
        raster = raster + rng.normal(0.0, weather.noise_sigma, raster.shape)
    if weather.channel_dropout_p > 0.0:
        keep = rng.random(raster.shape) >= weather.channel_dropout_p
        raster = raster * keep
    if weather.brightness_bias != 0.0:
        raster = raster + weather.brightness_bias
    raster = np.clip(raster, 0.0, 1.0)
    raster = np.round(raster * 255.0) / 255.0
    return Observation(raster=raster, ego_speed=world.ego.speed)
