"""Controllers pluggable into the benchmark loop.

A controller exposes act(obs, cmds, world, route) -> (steer, accel). The
world and route arguments give scripted controllers privileged state;
learned controllers ignore them.
"""

from __future__ import annotations

from .decision import CommandPair
from .expert import expert_action
from .nn.optim import ParamStore
from .observe import Observation
from .policy import ModelConfig, act
from .scene import Route
from .world import WorldState


class ExpertController:
    """Scripted demonstration driver wrapped as a policy."""

    def act(self, obs: Observation, cmds: CommandPair, world: WorldState,
            route: Route) -> tuple[float, float]:
        return expert_action(world, route)


class LearnedController:
    """Checkpointed network policy; acts from (observation, commands) only."""

    def __init__(self, store: ParamStore, config: ModelConfig):
        self.store = store
        self.config = config

    def act(self, obs: Observation, cmds: CommandPair, world: WorldState,
            route: Route) -> tuple[float, float]:
        return act(obs, cmds, self.store, self.config)


class ConstantController:
    def __init__(self, steer: float = 0.0, accel: float = 0.0):
        self.action = (steer, accel)

    def act(self, obs, cmds, world, route):
        return self.action
