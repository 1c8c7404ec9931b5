"""World state and deterministic episode dynamics.

One simulator tick is ``DT`` seconds. A full step is: move the ego with the
kinematic bicycle model, advance pedestrians (who yield to a moving ego at
close range), update lane-invasion accounting, then increment the tick.
Identical (scene, route, weather, seed, action sequence) inputs reproduce
bit-identical state trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import (Pose2D, Vec2, cumulative_lengths, heading_to_dir,
                       min_distance_to_polyline, nearest_arc_position,
                       right_of, wrap_angle)
from .scene import Crosswalk, Route, SceneSpec, route_crosswalk_ids

DT = 0.1
MAX_TICKS = 1000
STEER_MAX_RAD = 0.5
ACCEL_LOW = -6.0
ACCEL_HIGH = 3.0
V_MAX = 15.0

EGO_WHEELBASE = 2.5
EGO_HALF_LENGTH = 2.2
EGO_HALF_WIDTH = 0.95

PED_RADIUS = 0.35
PED_YIELD_RANGE = 3.0
PED_YIELD_DECEL = 3.0
PED_RECOVER_ACCEL = 1.5
PED_DISRUPT_SPEED = 0.2
PED_DISRUPT_BASE_MIN = 0.5
EGO_MOVING_SPEED = 0.5

GOAL_RADIUS = 2.0
END_HEADING_TOL_RAD = math.radians(15.0)
END_OFFSET_TOL = 1.0
INVASION_LIMIT = 5
INVASION_REFRACTORY = 10

EVENT_COLLISION = "Collision"
EVENT_LANE_INVASION = "LaneInvasion"
EVENT_POOR_END_POSE = "PoorEndPose"
EVENT_TIMEOUT = "Timeout"
EVENT_SUCCESS = "Success"
ALL_EVENTS = (EVENT_COLLISION, EVENT_LANE_INVASION, EVENT_POOR_END_POSE,
              EVENT_TIMEOUT, EVENT_SUCCESS)


@dataclass(frozen=True, slots=True)
class EgoState:
    pose: Pose2D
    speed: float
    wheelbase: float = EGO_WHEELBASE
    half_extents: Vec2 = Vec2(EGO_HALF_LENGTH, EGO_HALF_WIDTH)


@dataclass(frozen=True, slots=True)
class PedestrianState:
    id: int
    pose: Pose2D
    walk_speed: float
    crosswalk_id: int
    progress: float
    disrupted: bool
    base_speed: float
    direction: int = 1       # +1 walks a->b, -1 walks b->a
    side_offset: float = 0.0  # placement across the crosswalk band


@dataclass(frozen=True, slots=True)
class WorldState:
    scene: SceneSpec
    route: Route
    ego: EgoState
    pedestrians: tuple[PedestrianState, ...]
    tick: int
    rng_seed: int
    lane_invasion_count: int
    invasion_cooldown: int = 0


def accel_map(a_acc: float) -> float:
    """Linear [-1, 1] -> [-6, +3] m/s^2 pedal mapping."""
    return ACCEL_LOW + (a_acc + 1.0) * 0.5 * (ACCEL_HIGH - ACCEL_LOW)


def clip_action(steer: float, accel: float) -> tuple[float, float]:
    return (min(1.0, max(-1.0, steer)), min(1.0, max(-1.0, accel)))


def ego_step(ego: EgoState, action: tuple[float, float], dt: float) -> EgoState:
    """Kinematic bicycle update; position advances along the pre-update
    heading at the pre-update speed."""
    steer, acc = action
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (math.isfinite(steer) and math.isfinite(acc)
            and ego.pose.position.is_finite() and math.isfinite(ego.speed)):
        raise ValueError("non-finite ego state or action")
    v = ego.speed
    h = ego.pose.heading
    pos = ego.pose.position + heading_to_dir(h).scaled(v * dt)
    new_h = wrap_angle(h + (v / ego.wheelbase) * math.tan(STEER_MAX_RAD * steer) * dt)
    new_v = min(V_MAX, max(0.0, v + accel_map(acc) * dt))
    return replace(ego, pose=Pose2D(pos, new_h), speed=new_v)


def ego_box_distance(ego: EgoState, p: Vec2) -> float:
    """Distance from a point to the ego's oriented collision box."""
    local = ego.pose.to_local(p)
    dx = max(0.0, abs(local.x) - ego.half_extents.x)
    dy = max(0.0, abs(local.y) - ego.half_extents.y)
    return math.hypot(dx, dy)


def ego_box_corners(ego: EgoState) -> list[Vec2]:
    hx, hy = ego.half_extents.x, ego.half_extents.y
    return [ego.pose.from_local(Vec2(sx * hx, sy * hy))
            for sx in (1.0, -1.0) for sy in (1.0, -1.0)]


def _ped_endpoints(cw: Crosswalk, ped: PedestrianState) -> tuple[Vec2, Vec2]:
    if ped.direction > 0:
        a, b = cw.a, cw.b
    else:
        a, b = cw.b, cw.a
    axis = right_of(cw.walk_dir())
    off = axis.scaled(ped.side_offset)
    return a + off, b + off


def ped_position(scene: SceneSpec, ped: PedestrianState) -> Vec2:
    cw = scene.crosswalks[ped.crosswalk_id]
    a, b = _ped_endpoints(cw, ped)
    return a + (b - a).scaled(ped.progress)


def pedestrians_step(world: WorldState, dt: float) -> WorldState:
    """Advance pedestrians along their crosswalks.

    A pedestrian on the roadway within PED_YIELD_RANGE of a moving ego's
    collision box sheds speed toward zero and recovers once clear. The
    ``disrupted`` flag latches per step whenever an ordinarily-walking
    pedestrian (base speed >= 0.5) has been slowed under 0.2 m/s by the ego.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    ego = world.ego
    ego_moving = ego.speed > EGO_MOVING_SPEED
    new_peds = []
    for ped in world.pedestrians:
        cw = world.scene.crosswalks[ped.crosswalk_id]
        pos = ped_position(world.scene, ped)
        on_road = world.scene.contains_drivable(pos)
        near = (on_road and ego_moving
                and ego_box_distance(ego, pos) <= PED_YIELD_RANGE)
        if near:
            speed = max(0.0, ped.walk_speed - PED_YIELD_DECEL * dt)
        else:
            speed = min(ped.base_speed, ped.walk_speed + PED_RECOVER_ACCEL * dt)
        progress = ped.progress
        if progress < 1.0:
            progress = min(1.0, progress + speed * dt / cw.length())
        disrupted = (near and speed < PED_DISRUPT_SPEED
                     and ped.base_speed >= PED_DISRUPT_BASE_MIN)
        a, b = _ped_endpoints(cw, ped)
        walk = b - a
        heading = math.atan2(walk.y, walk.x)
        new_pos = a + walk.scaled(progress)
        new_peds.append(replace(
            ped, pose=Pose2D(new_pos, heading), walk_speed=speed,
            progress=progress, disrupted=disrupted))
    return replace(world, pedestrians=tuple(new_peds))


def _ego_invading(world: WorldState) -> bool:
    scene, route, ego = world.scene, world.route, world.ego
    for corner in ego_box_corners(ego):
        if not scene.contains_drivable(corner):
            return True
    if not scene.in_junction_box(ego.pose.position):
        lat = min_distance_to_polyline(ego.pose.position, route.points())
        if lat > scene.lane_width:
            return True
    return False


def _update_invasion(world: WorldState) -> WorldState:
    cooldown = world.invasion_cooldown
    count = world.lane_invasion_count
    if cooldown == 0 and _ego_invading(world):
        count += 1
        cooldown = INVASION_REFRACTORY + 1  # suppress the next 10 ticks
    return replace(world, lane_invasion_count=count,
                   invasion_cooldown=max(0, cooldown - 1))


def step_world(world: WorldState, action: tuple[float, float],
               dt: float = DT) -> WorldState:
    w = replace(world, ego=ego_step(world.ego, action, dt))
    w = pedestrians_step(w, dt)
    w = _update_invasion(w)
    return replace(w, tick=world.tick + 1)


def detect_terminal(world: WorldState, route: Route) -> str | None:
    """First terminal event for the current state, or None.

    Precedence: Collision > LaneInvasion > PoorEndPose/Success at goal
    approach > Timeout.
    """
    ego = world.ego
    for ped in world.pedestrians:
        if ego_box_distance(ego, ped.pose.position) <= PED_RADIUS:
            return EVENT_COLLISION
    if world.lane_invasion_count > INVASION_LIMIT:
        return EVENT_LANE_INVASION
    if ego.pose.position.dist(route.goal) <= GOAL_RADIUS:
        heading_err = abs(wrap_angle(ego.pose.heading - route.goal_lane_direction))
        lane_dir = heading_to_dir(route.goal_lane_direction)
        offset = abs(lane_dir.cross(ego.pose.position - route.goal))
        if heading_err > END_HEADING_TOL_RAD or offset > END_OFFSET_TOL:
            return EVENT_POOR_END_POSE
        return EVENT_SUCCESS
    if world.tick >= MAX_TICKS:
        return EVENT_TIMEOUT
    return None


def _solve_crossing_ped(scene: SceneSpec, route: Route, cw: Crosswalk,
                        rng: np.random.Generator, ped_id: int) -> PedestrianState:
    """Place a pedestrian so it occupies the route corridor when the ego,
    starting from rest, reaches this crosswalk."""
    pts = route.points()
    cum = cumulative_lengths(pts)
    mid = Vec2((cw.a.x + cw.b.x) / 2.0, (cw.a.y + cw.b.y) / 2.0)
    s_cross, _ = nearest_arc_position(mid, pts, cum)
    crossing_pt = None
    d = cw.walk_dir()
    n = right_of(d)
    for p in pts:
        rel = p - mid
        if abs(rel.dot(n)) <= cw.width / 2.0 and abs(rel.dot(d)) <= cw.length() / 2.0:
            crossing_pt = p
            break
    if crossing_pt is None:
        crossing_pt = mid
    t_arrival = 2.0 + s_cross / 4.5  # startup lag plus rough cruise estimate
    base = float(rng.uniform(0.8, 1.3))
    side_offset = float(rng.uniform(-1.0, 1.0))
    direction = 1 if rng.random() < 0.5 else -1
    length = cw.length()
    for _ in range(2):
        a = cw.a if direction > 0 else cw.b
        frac_cross = (crossing_pt - a).norm() / length
        p0 = frac_cross - base * t_arrival / length
        if p0 >= 0.02:
            break
        direction = -direction
    p0 = min(0.9, max(0.02, p0))
    ped = PedestrianState(
        id=ped_id, pose=Pose2D(Vec2(0.0, 0.0), 0.0), walk_speed=base,
        crosswalk_id=cw.crosswalk_id, progress=p0, disrupted=False,
        base_speed=base, direction=direction, side_offset=side_offset)
    a, b = _ped_endpoints(cw, ped)
    walk = b - a
    pos = a + walk.scaled(p0)
    return replace(ped, pose=Pose2D(pos, math.atan2(walk.y, walk.x)))


def spawn_episode(scene: SceneSpec, route_id: int, weather,
                  seed: int) -> WorldState:
    """Seeded episode start: ego at rest on the route origin, 20-30
    pedestrians on the crosswalks, at least one timed to cross the route.

    Weather only shapes observations, not dynamics; it is accepted here so
    an episode's full configuration lives in one call.
    """
    route = scene.route_by_id(route_id)  # KeyError for unknown ids
    rng = np.random.default_rng(seed)
    n_peds = int(rng.integers(20, 31))
    peds: list[PedestrianState] = []

    blocking = route_crosswalk_ids(scene, route)
    for k, cid in enumerate(blocking[:2]):
        peds.append(_solve_crossing_ped(scene, route,
                                        scene.crosswalks[cid], rng, k))
    while len(peds) < n_peds:
        i = len(peds)
        cid = int(rng.integers(0, len(scene.crosswalks)))
        direction = 1 if rng.random() < 0.5 else -1
        progress = float(rng.uniform(0.02, 0.95))
        base = float(rng.uniform(0.6, 1.4))
        side_offset = float(rng.uniform(-1.2, 1.2))
        ped = PedestrianState(
            id=i, pose=Pose2D(Vec2(0.0, 0.0), 0.0), walk_speed=base,
            crosswalk_id=cid, progress=progress, disrupted=False,
            base_speed=base, direction=direction, side_offset=side_offset)
        cw = scene.crosswalks[cid]
        a, b = _ped_endpoints(cw, ped)
        walk = b - a
        pos = a + walk.scaled(progress)
        peds.append(replace(ped, pose=Pose2D(pos, math.atan2(walk.y, walk.x))))

    ego = EgoState(
        pose=Pose2D(route.waypoints[0], route.lane_directions[0]),
        speed=0.0)
    return WorldState(
        scene=scene, route=route, ego=ego, pedestrians=tuple(peds),
        tick=0, rng_seed=seed, lane_invasion_count=0)


def world_to_dict(world: WorldState) -> dict:
    """Serializable snapshot used by determinism tests and the wire format."""
    return {
        "scene_id": world.scene.scene_id,
        "route_id": world.route.route_id,
        "tick": world.tick,
        "rng_seed": world.rng_seed,
        "lane_invasion_count": world.lane_invasion_count,
        "invasion_cooldown": world.invasion_cooldown,
        "ego": {
            "x": world.ego.pose.position.x,
            "y": world.ego.pose.position.y,
            "heading": world.ego.pose.heading,
            "speed": world.ego.speed,
        },
        "pedestrians": [
            {"id": p.id, "x": p.pose.position.x, "y": p.pose.position.y,
             "heading": p.pose.heading, "walk_speed": p.walk_speed,
             "crosswalk_id": p.crosswalk_id, "progress": p.progress,
             "disrupted": p.disrupted, "base_speed": p.base_speed}
            for p in world.pedestrians
        ],
    }
