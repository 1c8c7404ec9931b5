import math
from dataclasses import replace

import numpy as np
import pytest

from fourway import expert, world
from fourway.decision import OffRouteError
from fourway.geometry import Pose2D, Vec2, cumulative_lengths, point_at_arc, right_of
from fourway.observe import WEATHERS
from fourway.scene import build_scene

CLEAR = WEATHERS["ClearNoon"]


def spawn_clear(scene_id=0, route_id=1, seed=5):
    """Spawn and strip pedestrians so corridors are clear."""
    w = world.spawn_episode(build_scene(scene_id), route_id, CLEAR, seed)
    return replace(w, pedestrians=())


def place(w, arc, speed, lateral=0.0, heading_offset=0.0):
    pts = w.route.points()
    cum = cumulative_lengths(pts)
    p = point_at_arc(pts, cum, arc)
    q = point_at_arc(pts, cum, arc + 0.5)
    heading = math.atan2(q.y - p.y, q.x - p.x)
    r = right_of(Vec2(math.cos(heading), math.sin(heading)))
    pos = p + r.scaled(lateral)
    ego = replace(w.ego, pose=Pose2D(pos, heading + heading_offset),
                  speed=speed)
    return replace(w, ego=ego)


class TestExpertAction:
    def test_aligned_at_target_speed_near_zero_action(self):
        w = place(spawn_clear(), arc=3.0, speed=5.56)
        steer, accel = expert.expert_action(w, w.route)
        assert abs(steer) < 0.05
        assert abs(accel) < 0.05

    def test_brake_floor_for_conflict_pedestrian(self):
        w = world.spawn_episode(build_scene(0), 1, CLEAR, 5)
        w = place(w, arc=2.0, speed=5.56)
        pts = w.route.points()
        cum = cumulative_lengths(pts)
        target = point_at_arc(pts, cum, 8.0)  # ~6 m ahead of the ego
        cw = w.scene.crosswalks[0]
        walk = cw.b - cw.a
        t = max(0.0, min(1.0, (target - cw.a).dot(walk) / walk.dot(walk)))
        ped = replace(w.pedestrians[0], crosswalk_id=0, progress=t,
                      side_offset=0.0, direction=1,
                      pose=Pose2D(cw.a + walk.scaled(t), 0.0))
        w = replace(w, pedestrians=(ped,))
        steer, accel = expert.expert_action(w, w.route)
        assert accel == -expert.ACTION_LIMIT
        # still at the floor once stopped, while the conflict persists
        w0 = replace(w, ego=replace(w.ego, speed=0.0))
        _, accel0 = expert.expert_action(w0, w0.route)
        assert accel0 == -expert.ACTION_LIMIT

    def test_left_offset_steers_right(self):
        # driver's left of the centerline: corrective steer is positive
        w = place(spawn_clear(), arc=4.0, speed=4.0, lateral=-0.5)
        steer, _ = expert.expert_action(w, w.route)
        assert steer > 0.0

    def test_right_offset_steers_left(self):
        w = place(spawn_clear(), arc=4.0, speed=4.0, lateral=0.5)
        steer, _ = expert.expert_action(w, w.route)
        assert steer < 0.0

    def test_actions_within_jerk_free_band(self):
        w = world.spawn_episode(build_scene(4), 2, CLEAR, 3)
        for _ in range(400):
            a = expert.expert_action(w, w.route)
            assert abs(a[0]) <= expert.ACTION_LIMIT
            assert abs(a[1]) <= expert.ACTION_LIMIT
            w = world.step_world(w, a)
            if world.detect_terminal(w, w.route):
                break

    def test_off_route_error(self):
        w = spawn_clear()
        lost = replace(w.ego, pose=Pose2D(Vec2(300.0, 300.0), 0.0))
        with pytest.raises(OffRouteError):
            expert.expert_action(replace(w, ego=lost), w.route)

    def test_closed_loop_success_smoke(self):
        w = world.spawn_episode(build_scene(0), 0, CLEAR, 77)
        for _ in range(1000):
            w = world.step_world(w, expert.expert_action(w, w.route))
            term = world.detect_terminal(w, w.route)
            if term:
                break
        assert term == "Success"


class TestInjectNoise:
    def test_zero_probability_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = (0.4, -0.2)
            assert expert.inject_noise(a, rng, p=0.0) == a

    def test_certain_noise_changes_steer_only(self):
        rng = np.random.default_rng(1)
        hits = 0
        for _ in range(100):
            intended = (0.3, -0.5)
            executed = expert.inject_noise(intended, rng, p=1.0)
            assert executed[1] == intended[1]
            if executed[0] != intended[0]:
                hits += 1
        assert hits == 100  # uniform noise is nonzero almost surely

    def test_noise_bounded_and_clipped(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            executed = expert.inject_noise((0.95, 0.0), rng, p=1.0)
            assert -1.0 <= executed[0] <= 1.0
            assert abs(executed[0] - 0.95) <= expert.NOISE_MAGNITUDE + 1e-12

    def test_frequency_matches_probability(self):
        rng = np.random.default_rng(3)
        n = 100_000
        perturbed = 0
        for _ in range(n):
            if expert.inject_noise((0.2, 0.0), rng, p=0.1)[0] != 0.2:
                perturbed += 1
        assert 0.095 <= perturbed / n <= 0.105

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            expert.inject_noise((0.0, 0.0), np.random.default_rng(0), p=1.5)
