"""Rule-based high-level command generation.

Commands condition the learned policy's branch selection and also steer the
scripted expert's speed control. Both the lateral and the longitudinal
command are pure functions of (world state, route).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .geometry import (Vec2, cumulative_lengths, min_distance_to_polyline,
                       nearest_arc_position, polyline_window, right_of)
from .scene import MISSION_LEFT, MISSION_RIGHT, Route, route_crosswalk_ids
from .world import WorldState


class LatCmd(IntEnum):
    FOLLOW_LANE = 0
    GO_STRAIGHT = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3


class LonCmd(IntEnum):
    DECELERATE = 0
    MAINTAIN = 1
    ACCELERATE = 2


LAT_NAMES = {LatCmd.FOLLOW_LANE: "FollowLane", LatCmd.GO_STRAIGHT: "GoStraight",
             LatCmd.TURN_LEFT: "TurnLeft", LatCmd.TURN_RIGHT: "TurnRight"}
LON_NAMES = {LonCmd.DECELERATE: "Decelerate", LonCmd.MAINTAIN: "Maintain",
             LonCmd.ACCELERATE: "Accelerate"}


@dataclass(frozen=True, slots=True)
class CommandPair:
    lat: LatCmd
    lon: LonCmd


TARGET_SPEED = 5.56          # 20 km/h
SPEED_MARGIN = 1.0
CONFLICT_LOOKAHEAD = 12.0
CONFLICT_HALF_WIDTH = 2.5
CAUTION_RANGE = 10.0         # slow-approach window before an occupied crossing
OFF_ROUTE_LIMIT = 10.0
COMMAND_BOX_MARGIN = 2.0     # junction polygon inflation


class OffRouteError(RuntimeError):
    """Ego strayed more than OFF_ROUTE_LIMIT meters from its route."""


def _route_arc(world: WorldState, route: Route) -> float:
    pts = route.points()
    cum = cumulative_lengths(pts)
    s, d = nearest_arc_position(world.ego.pose.position, pts, cum)
    if d > OFF_ROUTE_LIMIT:
        raise OffRouteError(
            f"ego is {d:.1f} m from route {route.route_id} (limit "
            f"{OFF_ROUTE_LIMIT} m)")
    return s


def lateral_command(world: WorldState, route: Route) -> LatCmd:
    """FollowLane outside the junction polygon; the mission's turn type inside."""
    _route_arc(world, route)
    p = world.ego.pose.position
    inside = max(abs(p.x), abs(p.y)) <= world.scene.box_half + COMMAND_BOX_MARGIN
    if not inside:
        return LatCmd.FOLLOW_LANE
    if route.mission == MISSION_LEFT:
        return LatCmd.TURN_LEFT
    if route.mission == MISSION_RIGHT:
        return LatCmd.TURN_RIGHT
    return LatCmd.GO_STRAIGHT


def conflict_distance(world: WorldState, route: Route,
                      s_ego: float | None = None) -> float | None:
    """Arc distance to the nearest on-road pedestrian inside the route
    corridor (CONFLICT_LOOKAHEAD m ahead, CONFLICT_HALF_WIDTH half width),
    or None when the corridor is clear."""
    pts = route.points()
    cum = cumulative_lengths(pts)
    if s_ego is None:
        s_ego, _ = nearest_arc_position(world.ego.pose.position, pts, cum)
    corridor = polyline_window(pts, cum, s_ego, s_ego + CONFLICT_LOOKAHEAD)
    nearest: float | None = None
    for ped in world.pedestrians:
        pos = ped.pose.position
        if not world.scene.contains_drivable(pos):
            continue
        if min_distance_to_polyline(pos, corridor) <= CONFLICT_HALF_WIDTH:
            s_ped, _ = nearest_arc_position(pos, pts, cum)
            d = max(0.0, s_ped - s_ego)
            if nearest is None or d < nearest:
                nearest = d
    return nearest


def occupied_crosswalk_ahead(world: WorldState, route: Route,
                             s_ego: float | None = None) -> bool:
    """True when the route crosses a crosswalk within CAUTION_RANGE that has
    pedestrians on the roadway. Such pedestrians can enter the conflict
    corridor on short notice, so approach speed must already be low."""
    pts = route.points()
    cum = cumulative_lengths(pts)
    if s_ego is None:
        s_ego, _ = nearest_arc_position(world.ego.pose.position, pts, cum)
    on_road = [p.pose.position for p in world.pedestrians
               if world.scene.contains_drivable(p.pose.position)]
    if not on_road:
        return False
    for cid in route_crosswalk_ids(world.scene, route):
        cw = world.scene.crosswalks[cid]
        d = cw.walk_dir()
        n = right_of(d)
        mid = Vec2((cw.a.x + cw.b.x) / 2.0, (cw.a.y + cw.b.y) / 2.0)
        occupied = any(
            abs((pos - mid).dot(n)) <= cw.width / 2.0
            and abs((pos - mid).dot(d)) <= cw.length() / 2.0
            for pos in on_road)
        if not occupied:
            continue
        s_cw, _ = nearest_arc_position(mid, pts, cum)
        if -3.0 < s_cw - s_ego < CAUTION_RANGE:
            return True
    return False


def longitudinal_command(world: WorldState, route: Route) -> LonCmd:
    """Decelerate covers three regimes: a pedestrian inside the conflict
    corridor, an occupied crossing close ahead (slow-approach caution), or
    plain overspeed. Keying the caution regime to the command keeps the
    demonstrations' braking behavior attached to the conditioning input."""
    s_ego = _route_arc(world, route)
    v = world.ego.speed
    if conflict_distance(world, route, s_ego) is not None:
        return LonCmd.DECELERATE
    if occupied_crosswalk_ahead(world, route, s_ego):
        return LonCmd.DECELERATE
    if v > TARGET_SPEED + SPEED_MARGIN:
        return LonCmd.DECELERATE
    if v < TARGET_SPEED - SPEED_MARGIN:
        return LonCmd.ACCELERATE
    return LonCmd.MAINTAIN


def commands(world: WorldState, route: Route) -> CommandPair:
    return CommandPair(lat=lateral_command(world, route),
                       lon=longitudinal_command(world, route))
