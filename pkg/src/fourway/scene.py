"""Procedural four-way intersections, reference routes and weather catalog.

Six US-style unsignalized intersections (ids 0..5). Scenes 0, 1, 3, 4 are
the train split, scenes 2 and 5 the test split. Route counts per scene sum
to 40 across the catalog.

Geometry: the junction sits at the origin with arms along both axes. Each
arm carries ``lanes_per_direction`` lanes per travel direction under
right-hand traffic. A square "apron" around the origin (half size
``box_half``) is unmarked pavement; crosswalks span each arm just outside
it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from .geometry import (Vec2, cumulative_lengths, heading_to_dir,
                       quadratic_bezier, resample_polyline, right_of,
                       wrap_angle)

WAYPOINT_SPACING = 1.0

MISSION_LEFT = "LeftTurn"
MISSION_STRAIGHT = "GoStraight"
MISSION_RIGHT = "RightTurn"
MISSIONS = (MISSION_LEFT, MISSION_STRAIGHT, MISSION_RIGHT)

# Approach labels name the side the ego enters from; the direction is the
# travel direction (y grows downward, see geometry module).
APPROACH_DIRS = {
    "S": Vec2(0.0, -1.0),
    "N": Vec2(0.0, 1.0),
    "E": Vec2(-1.0, 0.0),
    "W": Vec2(1.0, 0.0),
}


@dataclass(frozen=True, slots=True)
class Crosswalk:
    """Pedestrian crossing over one arm; a->b spans the road plus margins."""
    crosswalk_id: int
    a: Vec2
    b: Vec2
    width: float

    def length(self) -> float:
        return self.a.dist(self.b)

    def walk_dir(self) -> Vec2:
        d = self.b - self.a
        return d.scaled(1.0 / d.norm())


@dataclass(frozen=True, slots=True)
class Route:
    route_id: int
    mission: str
    waypoints: tuple[Vec2, ...]
    lane_directions: tuple[float, ...]
    goal: Vec2
    goal_lane_direction: float

    def points(self) -> list[Vec2]:
        return list(self.waypoints)


@dataclass(frozen=True, slots=True)
class SceneSpec:
    scene_id: int
    lane_width: float
    lanes_per_direction: int
    crosswalks: tuple[Crosswalk, ...]
    routes: tuple[Route, ...]
    split: str
    road_half_width: float
    box_half: float
    arm_length: float

    def route_by_id(self, route_id: int) -> Route:
        for r in self.routes:
            if r.route_id == route_id:
                return r
        raise KeyError(f"scene {self.scene_id} has no route {route_id}")

    def contains_drivable(self, p: Vec2) -> bool:
        if max(abs(p.x), abs(p.y)) <= self.box_half:
            return True
        if abs(p.x) <= self.road_half_width and abs(p.y) <= self.arm_length:
            return True
        if abs(p.y) <= self.road_half_width and abs(p.x) <= self.arm_length:
            return True
        return False

    def in_junction_box(self, p: Vec2) -> bool:
        return max(abs(p.x), abs(p.y)) <= self.box_half


# (lane_width, lanes_per_direction, apron, arm_length, start_back, goal_ahead,
#  route specs as (approach, mission, in_lane, out_lane))
_SCENE_TABLE: dict[int, dict] = {
    0: dict(lane_width=3.5, lanes=1, apron=8.0, arm=48.0, back=15.0, ahead=14.0,
            routes=[("S", MISSION_LEFT, 0, 0), ("S", MISSION_STRAIGHT, 0, 0),
                    ("S", MISSION_RIGHT, 0, 0), ("N", MISSION_LEFT, 0, 0),
                    ("N", MISSION_STRAIGHT, 0, 0), ("E", MISSION_RIGHT, 0, 0),
                    ("W", MISSION_STRAIGHT, 0, 0)]),
    1: dict(lane_width=3.25, lanes=1, apron=8.5, arm=46.0, back=14.0, ahead=14.0,
            routes=[("S", MISSION_STRAIGHT, 0, 0), ("S", MISSION_RIGHT, 0, 0),
                    ("E", MISSION_LEFT, 0, 0), ("E", MISSION_STRAIGHT, 0, 0),
                    ("N", MISSION_RIGHT, 0, 0), ("W", MISSION_LEFT, 0, 0),
                    ("W", MISSION_STRAIGHT, 0, 0)]),
    2: dict(lane_width=3.5, lanes=2, apron=8.0, arm=52.0, back=15.0, ahead=14.0,
            routes=[("S", MISSION_LEFT, 0, 0), ("S", MISSION_RIGHT, 1, 1),
                    ("N", MISSION_STRAIGHT, 0, 0), ("E", MISSION_STRAIGHT, 1, 1),
                    ("E", MISSION_LEFT, 0, 0), ("W", MISSION_RIGHT, 1, 1)]),
    3: dict(lane_width=3.75, lanes=1, apron=8.0, arm=50.0, back=15.0, ahead=14.0,
            routes=[("S", MISSION_LEFT, 0, 0), ("S", MISSION_STRAIGHT, 0, 0),
                    ("E", MISSION_RIGHT, 0, 0), ("E", MISSION_STRAIGHT, 0, 0),
                    ("N", MISSION_LEFT, 0, 0), ("N", MISSION_RIGHT, 0, 0),
                    ("W", MISSION_STRAIGHT, 0, 0)]),
    4: dict(lane_width=3.4, lanes=2, apron=9.0, arm=52.0, back=15.0, ahead=14.0,
            routes=[("S", MISSION_STRAIGHT, 0, 0), ("S", MISSION_LEFT, 0, 0),
                    ("N", MISSION_STRAIGHT, 1, 1), ("N", MISSION_RIGHT, 1, 1),
                    ("E", MISSION_LEFT, 0, 0), ("E", MISSION_RIGHT, 1, 1),
                    ("W", MISSION_STRAIGHT, 0, 0)]),
    5: dict(lane_width=3.25, lanes=1, apron=9.5, arm=47.0, back=14.0, ahead=14.0,
            routes=[("S", MISSION_RIGHT, 0, 0), ("S", MISSION_STRAIGHT, 0, 0),
                    ("N", MISSION_LEFT, 0, 0), ("E", MISSION_STRAIGHT, 0, 0),
                    ("W", MISSION_LEFT, 0, 0), ("W", MISSION_RIGHT, 0, 0)]),
}

TRAIN_SCENES = (0, 1, 3, 4)
TEST_SCENES = (2, 5)


def _turn_exit_dir(d_in: Vec2, mission: str) -> Vec2:
    if mission == MISSION_STRAIGHT:
        return d_in
    if mission == MISSION_RIGHT:
        return right_of(d_in)
    return Vec2(d_in.y, -d_in.x)  # left


def _lane_offset(lane_width: float, lane_index: int) -> float:
    return lane_width * (lane_index + 0.5)


def _route_points(params: dict, spec: tuple) -> list[Vec2]:
    approach, mission, in_lane, out_lane = spec
    w = params["lane_width"]
    box_half = params["lanes"] * w + params["apron"]
    d_in = APPROACH_DIRS[approach]
    d_out = _turn_exit_dir(d_in, mission)
    a_in = right_of(d_in).scaled(_lane_offset(w, in_lane))
    start_s = box_half + params["back"]
    goal_s = box_half + params["ahead"]
    if mission == MISSION_STRAIGHT:
        # Continuing traffic keeps its lane line through the junction.
        start = a_in + d_in.scaled(-start_s)
        end = a_in + d_in.scaled(goal_s)
        return [start, end]
    a_out = right_of(d_out).scaled(_lane_offset(w, out_lane))
    entry = a_in + d_in.scaled(-box_half)
    exit_pt = a_out + d_out.scaled(box_half)
    control = a_in + a_out  # lane lines are axis-aligned and perpendicular
    pts = [a_in + d_in.scaled(-start_s), entry]
    pts.extend(quadratic_bezier(entry, control, exit_pt, 64)[1:])
    pts.append(a_out + d_out.scaled(goal_s))
    return pts


def _tangent_angles(points: list[Vec2]) -> list[float]:
    n = len(points)
    out = []
    for i in range(n):
        a = points[max(0, i - 1)]
        b = points[min(n - 1, i + 1)]
        out.append(math.atan2(b.y - a.y, b.x - a.x))
    return out


def build_scene(scene_id: int) -> SceneSpec:
    """Deterministic geometry and route set for one intersection."""
    if scene_id not in _SCENE_TABLE:
        raise ValueError(f"unknown scene id {scene_id}; valid ids are 0..5")
    params = _SCENE_TABLE[scene_id]
    w = params["lane_width"]
    lanes = params["lanes"]
    road_hw = lanes * w
    box_half = road_hw + params["apron"]

    crosswalks = []
    band_center = box_half + 1.5
    span = road_hw + 1.0  # 1 m waiting margin past each road edge
    for cid, (axis, sign) in enumerate(
            [("y", 1.0), ("x", 1.0), ("y", -1.0), ("x", -1.0)]):
        # Crosswalks cross the S, E, N, W arms in that id order.
        if axis == "y":
            a = Vec2(-span, sign * band_center)
            b = Vec2(span, sign * band_center)
        else:
            a = Vec2(sign * band_center, -span)
            b = Vec2(sign * band_center, span)
        crosswalks.append(Crosswalk(cid, a, b, 3.0))

    routes = []
    for rid, spec in enumerate(params["routes"]):
        raw = _route_points(params, spec)
        pts = resample_polyline(raw, WAYPOINT_SPACING)
        dirs = _tangent_angles(pts)
        d_out = _turn_exit_dir(APPROACH_DIRS[spec[0]], spec[1])
        goal_dir = wrap_angle(math.atan2(d_out.y, d_out.x))
        routes.append(Route(
            route_id=rid,
            mission=spec[1],
            waypoints=tuple(pts),
            lane_directions=tuple(dirs),
            goal=pts[-1],
            goal_lane_direction=goal_dir,
        ))

    return SceneSpec(
        scene_id=scene_id,
        lane_width=w,
        lanes_per_direction=lanes,
        crosswalks=tuple(crosswalks),
        routes=tuple(routes),
        split="train" if scene_id in TRAIN_SCENES else "test",
        road_half_width=road_hw,
        box_half=box_half,
        arm_length=params["arm"],
    )


def all_scenes() -> list[SceneSpec]:
    return [build_scene(i) for i in sorted(_SCENE_TABLE)]


def route_crosswalk_ids(scene: SceneSpec, route: Route) -> list[int]:
    """Crosswalks whose band the route actually drives through."""
    hits = []
    for cw in scene.crosswalks:
        d = cw.walk_dir()
        n = right_of(d)  # unit normal = arm axis direction
        mid = Vec2((cw.a.x + cw.b.x) / 2.0, (cw.a.y + cw.b.y) / 2.0)
        for p in route.waypoints:
            rel = p - mid
            if abs(rel.dot(n)) <= cw.width / 2.0 and abs(rel.dot(d)) <= cw.length() / 2.0:
                hits.append(cw.crosswalk_id)
                break
    return hits


def catalog() -> dict:
    """Versioned scene/route/weather catalog shared with the UI and CLI."""
    from .observe import WEATHERS  # local import to avoid a cycle

    scenes = []
    for s in all_scenes():
        scenes.append({
            "scene_id": s.scene_id,
            "split": s.split,
            "lane_width": s.lane_width,
            "lanes_per_direction": s.lanes_per_direction,
            "road_half_width": s.road_half_width,
            "box_half": s.box_half,
            "arm_length": s.arm_length,
            "crosswalks": [
                {"id": c.crosswalk_id, "a": [c.a.x, c.a.y],
                 "b": [c.b.x, c.b.y], "width": c.width}
                for c in s.crosswalks
            ],
            "routes": [
                {"route_id": r.route_id, "mission": r.mission,
                 "waypoints": [[p.x, p.y] for p in r.waypoints],
                 "lane_directions": list(r.lane_directions),
                 "goal": [r.goal.x, r.goal.y],
                 "goal_lane_direction": r.goal_lane_direction}
                for r in s.routes
            ],
        })
    weathers = [
        {"name": w.name, "split": w.split, "noise_sigma": w.noise_sigma,
         "channel_dropout_p": w.channel_dropout_p,
         "brightness_bias": w.brightness_bias}
        for w in WEATHERS.values()
    ]
    return {"version": 1, "scenes": scenes, "weathers": weathers}


def catalog_hash() -> str:
    doc = json.dumps(catalog(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()[:16]
