"""A synthesis problem in reward form.

Reachability properties are turned into total-reward properties on a reduced
game before any synthesis.  Multi-strategies found on the reduced game are
lifted back to the user's game by allowing everything at target states.
Penalties are always measured on the reduced game: once a target is reached
the run is over as far as the property is concerned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .game import (
    Model,
    ModelError,
    MultiStrategy,
    PenaltyScheme,
    Property,
    RewardStructure,
    StochasticGame,
    lift_to_reduced,
    reduce_reachability,
)


@dataclass(frozen=True)
class Instance:
    source: StochasticGame
    game: StochasticGame
    reward: RewardStructure
    prop: Property
    psi: PenaltyScheme
    sink: str | None = None

    @property
    def lower_bound(self) -> bool:
        return self.prop.lower_bound

    @property
    def threshold(self) -> Fraction:
        return self.prop.threshold

    @property
    def kind(self) -> str:
        return self.psi.kind

    def decision_states(self) -> list[str]:
        """Controller states with a real choice."""
        return [s for s in self.game.controller_states if len(self.game.actions(s)) > 1]

    def restrict(self, theta: MultiStrategy) -> MultiStrategy:
        """Multi-strategy of the source game as one of the reward game."""
        if self.game is self.source:
            return theta
        return lift_to_reduced(theta, self.game)

    def lift(self, theta: MultiStrategy) -> MultiStrategy:
        """Multi-strategy of the reward game as one of the source game."""
        if self.game is self.source:
            return theta
        choice = {}
        for s in self.source.controller_states:
            dist = theta.choice.get(s)
            acts = set(self.source.actions(s))
            if dist is not None and all(B <= acts for B, _ in dist):
                choice[s] = dist
            else:
                choice[s] = ((frozenset(acts), Fraction(1)),)
        return MultiStrategy(choice)

    def with_kind(self, kind: str) -> "Instance":
        return Instance(self.source, self.game, self.reward, self.prop, self.psi.with_kind(kind), self.sink)


def make_instance(
    game: StochasticGame,
    prop: Property,
    psi: PenaltyScheme,
    rewards: Mapping[str, RewardStructure] | None = None,
) -> Instance:
    if prop.kind == "reach":
        target = game.resolve(prop.target)
        rgame, reward, sink = reduce_reachability(game, target)
        kept = {k: v for k, v in psi.psi.items() if k in rgame.delta and rgame.is_controller(k[0])}
        rprop = Property("reward", prop.direction, prop.threshold, reward=reward.name)
        return Instance(game, rgame, reward, rprop, PenaltyScheme(kept, psi.kind), sink)
    if rewards is None or prop.reward not in rewards:
        raise ModelError(f"unknown reward structure {prop.reward!r}")
    return Instance(game, game, rewards[prop.reward], prop, psi, None)


def instance_from_model(model: Model, prop: Property, kind: str) -> Instance:
    return make_instance(model.game, prop, model.penalty(kind), model.rewards)
