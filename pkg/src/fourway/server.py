"""Teleop session server.

Streams world state over a WebSocket at the tick rate and applies the most
recent control message each tick (zero-order hold). One session at a time;
extra clients are refused with a busy error. Successful human episodes that
pass the quality gate are appended to the output dataset with the driver's
pre-noise steering as the label, exactly like scripted collection.

Wire protocol (JSON text frames):
  server -> client:
    {"type":"state","tick":int,"ego":{"x","y","heading","speed"},
     "pedestrians":[{"id","x","y","disrupted"}],
     "cmds":{"lat":str,"lon":str},"route":[[x,y],...]}
    {"type":"episode_end","terminal":str,"metrics":{...}}
    {"type":"error","reason":str}
  client -> server:
    {"type":"start","scene":int,"route":int,"weather":str,"seed":int,
     "mode":"human-drive"|"spectate"}
    {"type":"control","steer":float,"accel":float}

A ``lockstep`` server steps only after receiving a control message for the
latest state frame, which makes wire-driven runs bit-deterministic; the
default free-running mode paces itself with a monotonic deadline clock.
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import websockets

from . import bench, dataset as ds
from .decision import LAT_NAMES, LON_NAMES, OffRouteError, commands
from .expert import expert_action, inject_noise
from .observe import WEATHERS, render_observation
from .scene import build_scene, catalog_hash
from .world import (EVENT_LANE_INVASION, EVENT_SUCCESS, MAX_TICKS,
                    clip_action, detect_terminal, spawn_episode, step_world)

MODE_HUMAN = "human-drive"
MODE_SPECTATE = "spectate"


@dataclass
class SessionState:
    session_id: int
    mode: str = MODE_HUMAN
    latest_control: tuple[float, float] = (0.0, 0.0)
    control_queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    pending_start: dict | None = None
    closed: bool = False


def _metrics_dict(result: bench.EpisodeResult) -> dict:
    return {
        "ego_jerk": bench.ego_jerk([result]),
        "other_jerk": bench.other_jerk([result]),
        "dev_waypoint": bench.dev_waypoint([result]),
        "dev_destination": bench.dev_destination([result]),
        "heading_dev": bench.heading_dev([result]),
        "total_steps": bench.total_steps([result]),
    }


def _state_message(world, cmds) -> str:
    return json.dumps({
        "type": "state",
        "tick": world.tick,
        "ego": {"x": world.ego.pose.position.x,
                "y": world.ego.pose.position.y,
                "heading": world.ego.pose.heading,
                "speed": world.ego.speed},
        "pedestrians": [
            {"id": p.id, "x": p.pose.position.x, "y": p.pose.position.y,
             "disrupted": p.disrupted}
            for p in world.pedestrians],
        "cmds": {"lat": LAT_NAMES[cmds.lat], "lon": LON_NAMES[cmds.lon]},
        "route": [[p.x, p.y] for p in world.route.waypoints],
    })


def _sanitize_control(msg: dict) -> tuple[float, float] | None:
    try:
        steer = float(msg.get("steer", 0.0))
        accel = float(msg.get("accel", 0.0))
    except (TypeError, ValueError):
        return None
    if not (math.isfinite(steer) and math.isfinite(accel)):
        return None
    return clip_action(steer, accel)


class SessionServer:
    def __init__(self, out_path, defaults, tick_rate=10.0, lockstep=False,
                 noise_p=0.1, max_episodes=None):
        self.out_path = Path(out_path) if out_path else None
        self.defaults = defaults
        self.tick_rate = tick_rate
        self.lockstep = lockstep
        self.noise_p = noise_p
        self.max_episodes = max_episodes
        self.busy = False
        self.episodes_served = 0
        self.accepted: list[ds.Trajectory] = []
        self.done = asyncio.Event()
        self._next_session = 0

    async def handle(self, ws) -> None:
        if self.busy:
            await ws.send(json.dumps({"type": "error", "reason": "busy"}))
            await ws.close()
            return
        self.busy = True
        self._next_session += 1
        session = SessionState(session_id=self._next_session)
        reader = asyncio.create_task(self._read_loop(ws, session))
        try:
            start = await self._await_start(session)
            while start is not None and not session.closed:
                await self._run_episode(ws, session, start)
                self.episodes_served += 1
                if (self.max_episodes is not None
                        and self.episodes_served >= self.max_episodes):
                    self.done.set()
                    break
                start = await self._await_start(session)
        except websockets.ConnectionClosed:
            pass  # client vanished mid-episode: episode discarded
        finally:
            reader.cancel()
            self.busy = False

    async def _read_loop(self, ws, session: SessionState) -> None:
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    continue
                kind = msg.get("type")
                if kind == "control":
                    control = _sanitize_control(msg)
                    if control is not None:
                        session.latest_control = control
                        session.control_queue.put_nowait(control)
                elif kind == "start":
                    session.pending_start = msg
                    session.control_queue.put_nowait(None)  # wake lockstep
        except websockets.ConnectionClosed:
            pass
        session.closed = True
        session.control_queue.put_nowait(None)

    async def _await_start(self, session: SessionState) -> dict | None:
        while not session.closed:
            if session.pending_start is not None:
                start = session.pending_start
                session.pending_start = None
                return start
            await asyncio.sleep(0.02)
        return None

    async def _run_episode(self, ws, session: SessionState,
                           start: dict) -> None:
        scene_id = int(start.get("scene", self.defaults["scene"]))
        route_id = int(start.get("route", self.defaults["route"]))
        weather_name = start.get("weather", self.defaults["weather"])
        seed = int(start.get("seed", self.defaults["seed"]))
        session.mode = start.get("mode", MODE_HUMAN)
        if weather_name not in WEATHERS:
            await ws.send(json.dumps(
                {"type": "error", "reason": f"unknown weather {weather_name}"}))
            return
        scene = build_scene(scene_id)
        weather = WEATHERS[weather_name]
        world = spawn_episode(scene, route_id, weather, seed)
        route = world.route
        rng_obs = np.random.default_rng(bench.episode_seed(seed, 1))
        rng_noise = np.random.default_rng(bench.episode_seed(seed, 2))

        session.latest_control = (0.0, 0.0)
        while not session.control_queue.empty():
            session.control_queue.get_nowait()

        recorded: list[bench.RecordedStep] = []
        actions, poses, wp_pairs = [], [], []
        disruptions = 0
        prev_flags = {p.id: p.disrupted for p in world.pedestrians}
        terminal = None
        interval = 1.0 / self.tick_rate if self.tick_rate > 0 else 0.0
        loop = asyncio.get_running_loop()
        deadline = loop.time()

        while terminal is None and not session.closed:
            obs = render_observation(world, weather, rng_obs)
            try:
                cmds = commands(world, route)
            except OffRouteError:
                terminal = EVENT_LANE_INVASION
                break
            await ws.send(_state_message(world, cmds))

            if self.lockstep:
                item = await session.control_queue.get()
                if item is None:  # restart or disconnect
                    return
                control = item
            else:
                deadline += interval
                await asyncio.sleep(max(0.0, deadline - loop.time()))
                control = session.latest_control
            if session.pending_start is not None:
                return  # client restarted mid-episode: discard

            if session.mode == MODE_SPECTATE:
                intended = clip_action(*expert_action(world, route))
            else:
                intended = clip_action(*control)
            executed = (inject_noise(intended, rng_noise, self.noise_p)
                        if self.noise_p > 0 else intended)
            recorded.append(bench.RecordedStep(
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
            poses.append((world.ego.pose.position.x,
                          world.ego.pose.position.y, world.ego.pose.heading))
            wp_pairs.append(bench._nearest_waypoint_pair(
                route, world.ego.pose.position))
            terminal = detect_terminal(world, route)
            if terminal is None and world.tick >= MAX_TICKS:
                terminal = "Timeout"

        if terminal is None:
            return
        ego = world.ego
        result = bench.EpisodeResult(
            terminal=terminal, steps=world.tick, actions=actions, poses=poses,
            disruption_events=disruptions,
            final_position=(ego.pose.position.x, ego.pose.position.y),
            final_heading=ego.pose.heading, goal=(route.goal.x, route.goal.y),
            goal_lane_direction=route.goal_lane_direction,
            waypoint_pairs=wp_pairs)
        metrics = _metrics_dict(result)
        quality = dict(metrics)
        quality["ego_jerk"] = float(sum(
            1 for s in recorded
            if abs(s.intended[0]) > bench.JERK_THRESHOLD
            or abs(s.intended[1]) > bench.JERK_THRESHOLD))
        accepted = False
        if (terminal == EVENT_SUCCESS and session.mode == MODE_HUMAN
                and self.out_path is not None and ds.quality_gate(quality)):
            split = "val" if (len(self.accepted) % 6) == 5 else "train"
            if scene.split == "test":
                split = "test"
            self.accepted.append(ds.Trajectory(
                samples=ds.steps_to_samples(recorded, scene_id, route_id,
                                            weather_name, seed),
                terminal=terminal, quality=quality, split=split,
                scene_id=scene_id, route_id=route_id, weather=weather_name,
                seed=seed))
            ds.write_dataset(self.out_path, ds.Dataset(
                trajectories=self.accepted, catalog_hash=catalog_hash()))
            accepted = True
        await ws.send(json.dumps({
            "type": "episode_end", "terminal": terminal, "metrics": metrics,
            "recorded": accepted}))


async def serve(port: int, out_path=None, default_scene=0, default_route=0,
                default_weather="ClearNoon", default_seed=0,
                tick_rate: float = 10.0, lockstep: bool = False,
                noise_p: float = 0.1, max_episodes: int | None = None,
                ready_event: asyncio.Event | None = None) -> SessionServer:
    """Run the session server until cancelled (or until ``max_episodes``)."""
    server = SessionServer(
        out_path=out_path,
        defaults={"scene": default_scene, "route": default_route,
                  "weather": default_weather, "seed": default_seed},
        tick_rate=tick_rate, lockstep=lockstep, noise_p=noise_p,
        max_episodes=max_episodes)
    async with websockets.serve(server.handle, "127.0.0.1", port,
                                max_size=2 ** 22):
        if ready_event is not None:
            ready_event.set()
        await server.done.wait()
    return server
