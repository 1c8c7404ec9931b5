"""Scripted demonstration driver: pure pursuit steering plus proportional
speed control with a braking override that stops short of crossing
pedestrians.

All expert outputs stay inside [-0.9, 0.9]. The benchmark counts any
|action| > 0.9 as a jerk event, and demonstration quality requires a
jerk-free expert, so the brake/throttle floor sits exactly at the metric
threshold.
"""

from __future__ import annotations

import math

import numpy as np

from .decision import (OFF_ROUTE_LIMIT, TARGET_SPEED, OffRouteError,
                       conflict_distance, occupied_crosswalk_ahead)
from .geometry import cumulative_lengths, nearest_arc_position, point_at_arc
from .scene import Route
from .world import STEER_MAX_RAD, WorldState, clip_action

LOOKAHEAD_BASE = 4.0
LOOKAHEAD_GAIN = 0.3
ACCEL_GAIN = 0.5
STOP_MARGIN = 3.5  # arc distance is center-to-center; covers the 2.2 m nose
BRAKE_TRIGGER_DECEL = 1.2   # m/s^2 of required deceleration before braking
CAUTION_SPEED = 2.8
ACTION_LIMIT = 0.9
NOISE_MAGNITUDE = 0.1


def expert_action(world: WorldState, route: Route) -> tuple[float, float]:
    """Control action the scripted expert takes in the current state."""
    ego = world.ego
    pts = route.points()
    cum = cumulative_lengths(pts)
    s_ego, dist = nearest_arc_position(ego.pose.position, pts, cum)
    if dist > OFF_ROUTE_LIMIT:
        raise OffRouteError(
            f"expert is {dist:.1f} m off route {route.route_id}")

    lookahead = LOOKAHEAD_BASE + LOOKAHEAD_GAIN * ego.speed
    target = point_at_arc(pts, cum, s_ego + lookahead)
    local = ego.pose.to_local(target)
    d2 = local.x * local.x + local.y * local.y
    if d2 < 1e-9:
        steer = 0.0
    else:
        curvature = 2.0 * local.y / d2
        steer = math.atan(ego.wheelbase * curvature) / STEER_MAX_RAD

    target_speed = TARGET_SPEED
    if occupied_crosswalk_ahead(world, route, s_ego):
        target_speed = min(target_speed, CAUTION_SPEED)
    accel = ACCEL_GAIN * (target_speed - ego.speed)
    conflict = conflict_distance(world, route, s_ego)
    if conflict is not None:
        stop_in = conflict - STOP_MARGIN
        v = ego.speed
        if stop_in <= 0.0 or v < 0.3:
            accel = -ACTION_LIMIT
        else:
            required = v * v / (2.0 * stop_in)
            if required >= BRAKE_TRIGGER_DECEL:
                accel = -ACTION_LIMIT
            else:
                accel = min(accel, 0.0)

    steer = min(ACTION_LIMIT, max(-ACTION_LIMIT, steer))
    accel = min(ACTION_LIMIT, max(-ACTION_LIMIT, accel))
    return (steer, accel)


def inject_noise(intended: tuple[float, float], rng: np.random.Generator,
                 p: float = 0.1) -> tuple[float, float]:
    """With probability p, perturb the executed steering by U(-0.1, 0.1).

    The acceleration channel is never perturbed. Callers store the intended
    action as the sample label and execute the returned one.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise probability must be in [0, 1], got {p}")
    steer, accel = intended
    if p > 0.0 and rng.random() < p:
        steer = steer + rng.uniform(-NOISE_MAGNITUDE, NOISE_MAGNITUDE)
    return clip_action(steer, accel)
