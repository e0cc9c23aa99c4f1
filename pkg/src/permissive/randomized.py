"""Granularity-M randomised multi-strategies through a gadget game.

Every controller state ``s`` of the original game becomes a fan-out to
selector states ``s@sel1 .. s@selm`` with probabilities ``l_i / M``.  Each
selector picks branch ``b1`` or ``b2`` (or both) leading to gadget copies
``s@g1`` and ``s@g2`` of ``s``.  A deterministic multi-strategy of the gadget
game allows set ``A1`` at ``s@g1`` and ``A2`` at ``s@g2``; the selectors
decide how much probability mass each set gets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .game import (
    CONTROLLER,
    STATIC,
    ModelError,
    MultiStrategy,
    PenaltyScheme,
    Property,
    RewardStructure,
    StochasticGame,
)
from .problem import Instance

SPLIT = "split"
B1, B2 = "b1", "b2"


def selector_weights(M: int) -> list[int]:
    """``l_1 = ceil(M/2)``, then each next weight is half of what is left, rounded up."""
    if M < 1:
        raise ValueError("granularity must be at least 1")
    out = []
    rest = M
    while rest > 0:
        l = (rest + 1) // 2
        out.append(l)
        rest -= l
    return out


def subset_for(M: int, k: int) -> frozenset[int]:
    """1-based selector indices whose weights sum to ``k`` (greedy, largest first)."""
    if not 0 <= k <= M:
        raise ValueError(f"k={k} outside 0..{M}")
    chosen = set()
    rest = k
    for i, l in enumerate(selector_weights(M), start=1):
        if l <= rest:
            chosen.add(i)
            rest -= l
    if rest:
        raise AssertionError(f"{k} is not representable at M={M}")
    return frozenset(chosen)


def granularity_for(eps, psi: PenaltyScheme, game: StochasticGame | None = None) -> int:
    """Granularity that brings the static optimum within ``eps`` of the infimum."""
    if psi.kind != STATIC:
        raise ModelError("a closed-form granularity is only known for static penalties")
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if game is not None:
        total = sum((psi(s, a) for s, a in game.pairs()), Fraction(0))
    else:
        total = sum(psi.psi.values(), Fraction(0))
    return max(1, math.ceil(total / eps))


@dataclass(frozen=True)
class GadgetMapping:
    M: int
    weights: tuple[int, ...]
    selectors: Mapping[str, tuple[str, ...]]
    gadgets: Mapping[str, tuple[str, str]]
    original: StochasticGame

    @property
    def m(self) -> int:
        return len(self.weights)


def build_gadget_game(game: StochasticGame, M: int, psi: PenaltyScheme | None = None,
                      reward: RewardStructure | None = None):
    """Transformed game, mapping, transformed penalty and reward.

    Returns ``(g2, mapping, psi2, reward2)``; ``psi2`` and ``reward2`` copy the
    original values onto gadget actions and put 0 on split and branch actions.
    """
    if M < 1:
        raise ValueError("granularity must be at least 1")
    for s in game.states:
        if "@" in s:
            raise ModelError(f"state {s!r} already uses the reserved '@'")
    weights = tuple(selector_weights(M))
    states, owners, delta = [], {}, {}
    selectors, gadgets = {}, {}
    rw = reward.values if reward is not None else {}
    new_rw, new_psi = {}, {}
    for s in game.states:
        states.append(s)
        owners[s] = game.owners[s]
        if not game.is_controller(s):
            for a in game.actions(s):
                delta[(s, a)] = game.delta[(s, a)]
                if rw.get((s, a)):
                    new_rw[(s, a)] = rw[(s, a)]
            continue
        sels = tuple(f"{s}@sel{i}" for i in range(1, len(weights) + 1))
        g1, g2 = f"{s}@g1", f"{s}@g2"
        selectors[s] = sels
        gadgets[s] = (g1, g2)
        delta[(s, SPLIT)] = tuple((sel, Fraction(l, M)) for sel, l in zip(sels, weights))
        for sel in sels:
            states.append(sel)
            owners[sel] = CONTROLLER
            delta[(sel, B1)] = ((g1, Fraction(1)),)
            delta[(sel, B2)] = ((g2, Fraction(1)),)
        for g in (g1, g2):
            states.append(g)
            owners[g] = CONTROLLER
            for a in game.actions(s):
                delta[(g, a)] = game.delta[(s, a)]
                if rw.get((s, a)):
                    new_rw[(g, a)] = rw[(s, a)]
                if psi is not None and psi(s, a):
                    new_psi[(g, a)] = psi(s, a)
    g2 = StochasticGame(tuple(states), owners, game.initial, delta, dict(game.labels))
    mapping = GadgetMapping(M, weights, selectors, gadgets, game)
    kind = psi.kind if psi is not None else STATIC
    rname = reward.name if reward is not None else "reward"
    return g2, mapping, PenaltyScheme(new_psi, kind), RewardStructure(rname, new_rw)


def gadget_instance(inst: Instance, M: int):
    """Instance on the gadget game of ``inst.game``; returns ``(ginst, mapping)``."""
    g2, mapping, psi2, r2 = build_gadget_game(inst.game, M, inst.psi, inst.reward)
    prop = Property("reward", inst.prop.direction, inst.threshold, reward=r2.name)
    return Instance(g2, g2, r2, prop, psi2), mapping


def det_to_rand(theta2: MultiStrategy, mapping: GadgetMapping) -> MultiStrategy:
    """Aggregate selector choices into a granularity-M randomised multi-strategy."""
    choice = {}
    for s, sels in mapping.selectors.items():
        g1, g2 = mapping.gadgets[s]
        try:
            A1, A2 = theta2.allowed(g1), theta2.allowed(g2)
        except KeyError as e:
            raise ModelError(f"multi-strategy undefined at gadget {e.args[0]}") from None
        entries = []
        for sel, l in zip(sels, mapping.weights):
            if sel not in theta2.choice:
                raise ModelError(f"multi-strategy undefined at selector {sel}")
            branch = theta2.allowed(sel)
            if branch == {B1, B2}:
                acts = A1 | A2
            elif branch == {B1}:
                acts = A1
            else:
                acts = A2
            entries.append((acts, Fraction(l, mapping.M)))
        choice[s] = entries
    return MultiStrategy.from_distributions(choice)


def _split_sets(dist, M: int):
    """Order a support of size <= 2 as ``(A1, k, A2)`` with ``A1`` carrying ``k / M``."""
    if len(dist) > 2:
        raise ModelError("support larger than 2")
    for _, w in dist:
        if (w * M).denominator != 1:
            raise ModelError(f"off-grid weight {w} for granularity {M}")
    if len(dist) == 1:
        return dist[0][0], M, dist[0][0]
    (B1_, w1), (B2_, w2) = dist
    if w2 > w1:
        (B1_, w1), (B2_, w2) = (B2_, w2), (B1_, w1)
    return B1_, int(w1 * M), B2_


def rand_to_det(theta: MultiStrategy, mapping: GadgetMapping, gadget_game: StochasticGame | None = None) -> MultiStrategy:
    """Deterministic multi-strategy of the gadget game realising ``theta``.

    States of the gadget game that are not part of any gadget (the split
    states, environment states) keep all their actions.
    """
    sets = {}
    for s, sels in mapping.selectors.items():
        if s not in theta.choice:
            raise ModelError(f"multi-strategy undefined at {s}")
        A1, k, A2 = _split_sets(theta.choice[s], mapping.M)
        g1, g2 = mapping.gadgets[s]
        sets[g1], sets[g2] = A1, A2
        first = subset_for(mapping.M, k)
        for i, sel in enumerate(sels, start=1):
            sets[sel] = [B1] if i in first else [B2]
        sets[s] = [SPLIT]
    if gadget_game is not None:
        for s in gadget_game.controller_states:
            sets.setdefault(s, gadget_game.actions(s))
    return MultiStrategy.from_sets(sets)


def transformed_static_penalty(theta2: MultiStrategy, mapping: GadgetMapping, psi: PenaltyScheme) -> Fraction:
    """Static penalty of the randomised multi-strategy a gadget strategy encodes."""
    total = Fraction(0)
    game = mapping.original
    for s, sels in mapping.selectors.items():
        g1, g2 = mapping.gadgets[s]
        sets = {B1: theta2.allowed(g1), B2: theta2.allowed(g2)}
        for sel, l in zip(sels, mapping.weights):
            allowed = frozenset().union(*(sets[b] for b in theta2.allowed(sel)))
            miss = sum((psi(s, a) for a in game.actions(s) if a not in allowed), Fraction(0))
            total += Fraction(l, mapping.M) * miss
    return total


def write_mapping(mapping: GadgetMapping) -> str:
    lines = [f"granularity {mapping.M}", "weights " + " ".join(map(str, mapping.weights))]
    for s, sels in mapping.selectors.items():
        g1, g2 = mapping.gadgets[s]
        lines.append(f"gadget {s} {g1} {g2} " + " ".join(sels))
    return "\n".join(lines) + "\n"


def parse_mapping(text: str, original: StochasticGame) -> GadgetMapping:
    M, weights, sels, gads = None, None, {}, {}
    for line in text.splitlines():
        toks = line.split("#", 1)[0].split()
        if not toks:
            continue
        if toks[0] == "granularity":
            M = int(toks[1])
        elif toks[0] == "weights":
            weights = tuple(int(t) for t in toks[1:])
        elif toks[0] == "gadget":
            gads[toks[1]] = (toks[2], toks[3])
            sels[toks[1]] = tuple(toks[4:])
        else:
            raise ModelError(f"unknown mapping line {line!r}")
    if M is None or weights is None or tuple(selector_weights(M)) != weights:
        raise ModelError("mapping file lacks a consistent granularity and weights")
    return GadgetMapping(M, weights, sels, gads, original)
