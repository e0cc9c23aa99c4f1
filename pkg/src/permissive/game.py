"""Exact in-memory model of turn-based stochastic games and multi-strategies.

Probabilities, rewards and penalties are :class:`fractions.Fraction` values
throughout; numeric analysis converts to floating point at its own boundary.
Action names are scoped per state: ``(s, "east")`` and ``(t, "east")`` are
unrelated actions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

CONTROLLER = "controller"
ENVIRONMENT = "environment"
PLAYERS = (CONTROLLER, ENVIRONMENT)

STATIC = "static"
DYNAMIC = "dynamic"

Distribution = tuple[tuple[str, Fraction], ...]


class ModelError(ValueError):
    """Raised when a game, strategy or property is structurally invalid."""


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # floats are only accepted when they round-trip through a short decimal
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class StochasticGame:
    """A game ``<S_ctrl, S_env, init, A, delta>`` with exact probabilities.

    ``delta`` maps ``(state, action)`` to a tuple of ``(successor, prob)``
    pairs.  Enabled actions of a state are listed in insertion order of
    ``delta``.
    """

    states: tuple[str, ...]
    owners: Mapping[str, str]
    initial: str
    delta: Mapping[tuple[str, str], Distribution]
    labels: Mapping[str, frozenset[str]] = field(default_factory=dict)

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def _actions(self) -> dict[str, tuple[str, ...]]:
        acts: dict[str, list[str]] = {s: [] for s in self.states}
        for (s, a) in self.delta:
            acts.setdefault(s, []).append(a)
        return {s: tuple(v) for s, v in acts.items()}

    def actions(self, state: str) -> tuple[str, ...]:
        return self._actions.get(state, ())

    def owner(self, state: str) -> str:
        return self.owners[state]

    def is_controller(self, state: str) -> bool:
        return self.owners[state] == CONTROLLER

    @cached_property
    def controller_states(self) -> tuple[str, ...]:
        return tuple(s for s in self.states if self.owners[s] == CONTROLLER)

    @cached_property
    def environment_states(self) -> tuple[str, ...]:
        return tuple(s for s in self.states if self.owners[s] == ENVIRONMENT)

    def successors(self, state: str, action: str) -> Distribution:
        return self.delta[(state, action)]

    def pairs(self) -> Iterable[tuple[str, str]]:
        for s in self.states:
            for a in self.actions(s):
                yield s, a

    @cached_property
    def min_probability(self) -> Fraction:
        return min(p for dist in self.delta.values() for _, p in dist)

    def resolve(self, names: Iterable[str]) -> frozenset[str]:
        """Map state ids and label names to a set of state ids."""
        out: set[str] = set()
        for name in names:
            if name in self.index:
                out.add(name)
            elif name in self.labels:
                out |= set(self.labels[name])
            else:
                raise ModelError(f"unknown state or label {name!r}")
        return frozenset(out)


@dataclass(frozen=True)
class RewardStructure:
    name: str
    values: Mapping[tuple[str, str], Fraction] = field(default_factory=dict)

    def __call__(self, state: str, action: str) -> Fraction:
        return self.values.get((state, action), Fraction(0))

    def nonzero(self) -> dict[tuple[str, str], Fraction]:
        return {k: v for k, v in self.values.items() if v != 0}


@dataclass(frozen=True)
class PenaltyScheme:
    psi: Mapping[tuple[str, str], Fraction]
    kind: str = STATIC

    def __post_init__(self):
        if self.kind not in (STATIC, DYNAMIC):
            raise ModelError(f"penalty kind must be static or dynamic, got {self.kind!r}")
        for k, v in self.psi.items():
            if v < 0:
                raise ModelError(f"negative penalty at {k}")

    def __call__(self, state: str, action: str) -> Fraction:
        return self.psi.get((state, action), Fraction(0))

    def total(self, game: StochasticGame, state: str) -> Fraction:
        return sum((self(state, a) for a in game.actions(state)), Fraction(0))

    def with_kind(self, kind: str) -> "PenaltyScheme":
        return PenaltyScheme(self.psi, kind)


@dataclass(frozen=True)
class Property:
    """``P(>=|<=)p [F targets]`` or ``R{name}(>=|<=)b``."""

    kind: str  # "reach" | "reward"
    direction: str  # ">=" | "<="
    threshold: Fraction
    reward: str | None = None
    target: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("reach", "reward"):
            raise ModelError(f"unknown property kind {self.kind!r}")
        if self.direction not in (">=", "<="):
            raise ModelError(f"unknown comparison {self.direction!r}")
        if self.threshold < 0:
            raise ModelError("property threshold must be non-negative")
        if self.kind == "reach":
            if not 0 <= self.threshold <= 1:
                raise ModelError(f"reachability threshold {self.threshold} outside [0,1]")
            if not self.target:
                raise ModelError("reachability property needs a non-empty target")
        elif not self.reward:
            raise ModelError("reward property needs a reward structure name")

    @property
    def lower_bound(self) -> bool:
        return self.direction == ">="

    def __str__(self) -> str:
        b = _fmt(self.threshold)
        if self.kind == "reach":
            return f"P{self.direction}{b} [F {' '.join(self.target)}]"
        return f"R{{{self.reward}}}{self.direction}{b}"


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class MemorylessStrategy:
    choice: Mapping[str, Mapping[str, Fraction]]

    def action(self, state: str) -> str:
        (a,) = [a for a, p in self.choice[state].items() if p > 0]
        return a


SetDistribution = tuple[tuple[frozenset[str], Fraction], ...]


def _normalise(entries: Iterable[tuple[Iterable[str], Fraction]]) -> SetDistribution:
    merged: dict[frozenset[str], Fraction] = {}
    for acts, w in entries:
        key = frozenset(acts)
        w = as_fraction(w)
        if w == 0:
            continue
        merged[key] = merged.get(key, Fraction(0)) + w
    return tuple(sorted(merged.items(), key=lambda kv: (-len(kv[0]), sorted(kv[0]))))


@dataclass(frozen=True)
class MultiStrategy:
    """Memoryless multi-strategy: controller state -> distribution over action sets."""

    choice: Mapping[str, SetDistribution]

    @classmethod
    def from_sets(cls, allowed: Mapping[str, Iterable[str]]) -> "MultiStrategy":
        return cls({s: _normalise([(acts, Fraction(1))]) for s, acts in allowed.items()})

    @classmethod
    def from_distributions(
        cls, dists: Mapping[str, Iterable[tuple[Iterable[str], Fraction]]]
    ) -> "MultiStrategy":
        return cls({s: _normalise(d) for s, d in dists.items()})

    @classmethod
    def allow_all(cls, game: StochasticGame) -> "MultiStrategy":
        return cls.from_sets({s: game.actions(s) for s in game.controller_states})

    @property
    def is_deterministic(self) -> bool:
        return all(len(d) == 1 for d in self.choice.values())

    def distribution(self, state: str) -> SetDistribution:
        return self.choice[state]

    def allowed(self, state: str) -> frozenset[str]:
        dist = self.choice[state]
        if len(dist) != 1:
            raise ModelError(f"multi-strategy is randomised at {state}")
        return dist[0][0]

    def support_size(self, state: str) -> int:
        return len(self.choice[state])

    def restricted(self, states: Iterable[str]) -> "MultiStrategy":
        keep = set(states)
        return MultiStrategy({s: d for s, d in self.choice.items() if s in keep})

    def updated(self, other: Mapping[str, SetDistribution]) -> "MultiStrategy":
        merged = dict(self.choice)
        merged.update(other)
        return MultiStrategy(merged)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    state: str | None = None
    action: str | None = None

    def __str__(self) -> str:
        where = ""
        if self.state is not None:
            where = f"{self.state}" + (f"/{self.action}" if self.action else "") + ": "
        return f"{where}{self.message} [{self.rule}]"


def validate_game(game: StochasticGame) -> list[Violation]:
    """Return every structural violation of ``game`` (empty list when valid)."""
    report: list[Violation] = []
    seen: set[str] = set()
    for s in game.states:
        if s in seen:
            report.append(Violation("unique-state", "duplicate state id", s))
        seen.add(s)
        if game.owners.get(s) not in PLAYERS:
            report.append(Violation("owner", f"state owner must be one of {PLAYERS}", s))
    if game.initial not in seen:
        report.append(Violation("initial", f"initial state {game.initial!r} is not a state"))
    for (s, a), dist in game.delta.items():
        if s not in seen:
            report.append(Violation("known-state", "transition from unknown state", s, a))
            continue
        total = Fraction(0)
        for t, p in dist:
            if t not in seen:
                report.append(Violation("known-successor", f"unknown successor {t!r}", s, a))
            if p <= 0:
                report.append(Violation("positive-probability", f"probability {p} to {t} is not positive", s, a))
            total += p
        if total != 1:
            report.append(Violation("sum-to-one", f"distribution sums to {_fmt(total)}", s, a))
        succs = [t for t, _ in dist]
        if len(set(succs)) != len(succs):
            report.append(Violation("unique-successor", "successor listed twice", s, a))
    for s in game.states:
        if not game.actions(s):
            report.append(Violation("enabled-action", "state has no enabled action", s))
    for name, members in game.labels.items():
        for s in members:
            if s not in seen:
                report.append(Violation("label", f"label {name!r} names unknown state {s!r}"))
    return report


def check_game(game: StochasticGame) -> StochasticGame:
    report = validate_game(game)
    if report:
        raise ModelError("; ".join(str(v) for v in report))
    return game


class GameBuilder:
    """Incremental construction of a validated :class:`StochasticGame`."""

    def __init__(self):
        self._states: list[str] = []
        self._owners: dict[str, str] = {}
        self._initial: str | None = None
        self._delta: dict[tuple[str, str], Distribution] = {}
        self._labels: dict[str, set[str]] = {}

    def state(self, sid: str, owner: str = CONTROLLER) -> "GameBuilder":
        if sid in self._owners:
            raise ModelError(f"duplicate state {sid!r}")
        self._states.append(sid)
        self._owners[sid] = owner
        if self._initial is None:
            self._initial = sid
        return self

    def init(self, sid: str) -> "GameBuilder":
        self._initial = sid
        return self

    def trans(self, s: str, a: str, dist: Mapping[str, object] | Sequence[tuple[str, object]]) -> "GameBuilder":
        if (s, a) in self._delta:
            raise ModelError(f"duplicate transition {s}/{a}")
        items = dist.items() if isinstance(dist, Mapping) else dist
        self._delta[(s, a)] = tuple((t, as_fraction(p)) for t, p in items)
        return self

    def label(self, name: str, *states: str) -> "GameBuilder":
        self._labels.setdefault(name, set()).update(states)
        return self

    def build(self) -> StochasticGame:
        game = StochasticGame(
            tuple(self._states),
            dict(self._owners),
            self._initial if self._initial is not None else "",
            dict(self._delta),
            {k: frozenset(v) for k, v in self._labels.items()},
        )
        return check_game(game)


@dataclass(frozen=True)
class Model:
    """A game together with its named reward structures and penalty function."""

    game: StochasticGame
    rewards: Mapping[str, RewardStructure] = field(default_factory=dict)
    psi: Mapping[tuple[str, str], Fraction] = field(default_factory=dict)

    def penalty(self, kind: str = STATIC) -> PenaltyScheme:
        return PenaltyScheme(self.psi, kind)

    def reward(self, name: str) -> RewardStructure:
        try:
            return self.rewards[name]
        except KeyError:
            raise ModelError(f"unknown reward structure {name!r}") from None


def check_multistrategy(game: StochasticGame, theta: MultiStrategy) -> None:
    """Raise :class:`ModelError` unless ``theta`` is a valid multi-strategy for ``game``."""
    for s in game.controller_states:
        if s not in theta.choice:
            raise ModelError(f"multi-strategy undefined at controller state {s!r}")
    for s, dist in theta.choice.items():
        if s not in game.index or not game.is_controller(s):
            raise ModelError(f"{s!r} is not a controller state")
        enabled = set(game.actions(s))
        total = Fraction(0)
        for acts, w in dist:
            if not acts:
                raise ModelError(f"empty action set allowed at {s}")
            if not acts <= enabled:
                raise ModelError(f"unknown actions {sorted(acts - enabled)} at {s}")
            if w <= 0:
                raise ModelError(f"non-positive weight at {s}")
            total += w
        if total != 1:
            raise ModelError(f"weights at {s} sum to {_fmt(total)}")


def reduce_reachability(game: StochasticGame, target: Iterable[str], sink: str = "sink"):
    """Turn reachability of ``target`` into expected total reward.

    Every target state keeps a single action ``reach`` to a fresh controller
    sink with reward 1; the sink loops on ``done`` with reward 0.
    Returns ``(reduced_game, reward, sink_id)``.
    """
    target = frozenset(target)
    if not target:
        raise ModelError("empty reachability target")
    for s in target:
        if s not in game.index:
            raise ModelError(f"unknown target state {s!r}")
    while sink in game.index:
        sink = sink + "_"
    delta: dict[tuple[str, str], Distribution] = {}
    for s in game.states:
        if s in target:
            delta[(s, "reach")] = ((sink, Fraction(1)),)
        else:
            for a in game.actions(s):
                delta[(s, a)] = game.delta[(s, a)]
    delta[(sink, "done")] = ((sink, Fraction(1)),)
    owners = dict(game.owners)
    owners[sink] = CONTROLLER
    reduced = StochasticGame(game.states + (sink,), owners, game.initial, delta, dict(game.labels))
    reward = RewardStructure("reach", {(s, "reach"): Fraction(1) for s in target})
    return reduced, reward, sink


def lift_to_reduced(theta: MultiStrategy, reduced: StochasticGame) -> MultiStrategy:
    """Restrict ``theta`` to the controller states of a reachability-reduced game."""
    choice = {}
    for s in reduced.controller_states:
        acts = reduced.actions(s)
        if s in theta.choice and all(a in acts for B, _ in theta.choice[s] for a in B):
            choice[s] = theta.choice[s]
        else:
            choice[s] = _normalise([(acts, Fraction(1))])
    return MultiStrategy(choice)


def induced_model(game: StochasticGame, theta: MultiStrategy) -> StochasticGame:
    """Remove the controller actions disallowed by a deterministic ``theta``."""
    if not theta.is_deterministic:
        raise ModelError("induced_model needs a deterministic multi-strategy")
    delta = {}
    for s in game.states:
        if game.is_controller(s):
            if s not in theta.choice:
                raise ModelError(f"multi-strategy undefined at controller state {s!r}")
            keep = theta.allowed(s)
        else:
            keep = None
        for a in game.actions(s):
            if keep is None or a in keep:
                delta[(s, a)] = game.delta[(s, a)]
    return StochasticGame(game.states, dict(game.owners), game.initial, delta, dict(game.labels))


def local_penalty(theta: MultiStrategy, state: str, psi: PenaltyScheme, game: StochasticGame) -> Fraction:
    """Expected psi-mass of the actions that ``theta`` disallows at ``state``."""
    if state not in game.index or not game.is_controller(state):
        raise ModelError(f"{state!r} is not a controller state")
    enabled = game.actions(state)
    total = Fraction(0)
    for allowed, w in theta.distribution(state):
        total += w * sum((psi(state, a) for a in enabled if a not in allowed), Fraction(0))
    return total


def nonempty_subsets(actions: Sequence[str]) -> list[frozenset[str]]:
    """All non-empty subsets, largest first, then in action order."""
    out = []
    for k in range(len(actions), 0, -1):
        out.extend(frozenset(c) for c in itertools.combinations(actions, k))
    return out


def gen_knapsack_game(values, weights, V, W):
    """Knapsack instance as a dynamic-penalty permissive synthesis problem.

    Item ``i`` becomes a controller state ``t<i>`` reached with probability
    ``1/n``.  Action ``a<i>`` wins (reward 1) with probability ``v_i``;
    action ``b<i>`` loops and costs ``w_i`` when disallowed.  A sound
    deterministic multi-strategy with dynamic penalty at most ``W/n`` exists
    iff some item set has value at least ``V`` and weight at most ``W``.

    Returns ``(game, reward, penalty, property)``; the matching penalty
    bound is ``W / n``.
    """
    values = [as_fraction(v) for v in values]
    weights = [as_fraction(w) for w in weights]
    if len(values) != len(weights) or not values:
        raise ModelError("need the same positive number of values and weights")
    for v in values:
        if not 0 < v <= 1:
            raise ModelError(f"item value {v} outside (0,1]")
    for w in weights:
        if w < 0:
            raise ModelError(f"negative item weight {w}")
    n = len(values)
    b = GameBuilder().state("s0")
    for i in range(1, n + 1):
        b.state(f"t{i}").state(f"u{i}")
    b.state("top").state("bot")
    b.trans("s0", "go", [(f"t{i}", Fraction(1, n)) for i in range(1, n + 1)])
    reward, psi = {}, {}
    for i, (v, w) in enumerate(zip(values, weights), start=1):
        dist = [(f"u{i}", v)] + ([("bot", 1 - v)] if v < 1 else [])
        b.trans(f"t{i}", f"a{i}", dist)
        b.trans(f"t{i}", f"b{i}", [(f"t{i}", 1)])
        b.trans(f"u{i}", "win", [("top", 1)])
        reward[(f"u{i}", "win")] = Fraction(1)
        if w:
            psi[(f"t{i}", f"b{i}")] = w
    b.trans("top", "stay", [("top", 1)]).trans("bot", "stay", [("bot", 1)])
    b.label("goal", "top")
    prop = Property("reward", ">=", as_fraction(V) / n, reward="value")
    return b.build(), RewardStructure("value", reward), PenaltyScheme(psi, DYNAMIC), prop
