"""Independent reference computations used by the tests.

Everything here works on exact rationals by brute force: enumerate positional
profiles, build the induced Markov chain and solve it with Gaussian
elimination.  Nothing is shared with the value-iteration code under test.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from permissive.analysis import finite_reward_check
from permissive.game import DYNAMIC, STATIC, GameBuilder, Model, MultiStrategy, PenaltyScheme, Property, RewardStructure

INF = float("inf")


def _solve_exact(A, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def _reach(states, succ, sources):
    seen = set(sources)
    stack = list(sources)
    while stack:
        s = stack.pop()
        for t in succ[s]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def chain_total_reward(states, trans, rew):
    """Expected total reward of a Markov chain, exact (``INF`` where unbounded).

    ``trans[s]`` maps successors to probabilities; ``rew[s]`` is the reward
    collected on leaving ``s``.
    """
    succ = {s: [t for t, p in trans[s].items() if p > 0] for s in states}
    reach = {s: _reach(states, succ, [s]) for s in states}
    # bottom SCCs: every reachable state reaches back
    bottom = {s for s in states if all(s in reach[t] for t in reach[s])}
    bad = {s for s in bottom if any(rew[t] > 0 for t in reach[s])}
    inf = {s for s in states if reach[s] & bad}
    zero = {s for s in states if s not in inf and not any(rew[t] > 0 for t in reach[s])}
    rest = [s for s in states if s not in inf and s not in zero]
    idx = {s: i for i, s in enumerate(rest)}
    A = [[Fraction(0)] * len(rest) for _ in rest]
    b = [Fraction(0)] * len(rest)
    for s in rest:
        i = idx[s]
        A[i][i] += 1
        b[i] = rew[s]
        for t, p in trans[s].items():
            if t in idx:
                A[i][idx[t]] -= p
    sol = _solve_exact(A, b) if rest else []
    out = {s: Fraction(0) for s in zero}
    out.update({s: INF for s in inf})
    out.update({s: sol[idx[s]] for s in rest})
    return out


def _profiles(game, theta: MultiStrategy | None):
    """Every positional profile as ``{state: [(action, weight), ...]}``.

    Under ``theta`` the controller picks one action inside each allowed set;
    without it, one action per state.
    """
    options = []
    for s in game.states:
        if game.is_controller(s) and theta is not None:
            dist = theta.choice[s]
            per_set = [[(a, w) for a in sorted(B)] for B, w in dist]
            options.append([list(p) for p in itertools.product(*per_set)])
        else:
            options.append([[(a, Fraction(1))] for a in game.actions(s)])
    for combo in itertools.product(*options):
        yield dict(zip(game.states, combo))


def _chain_of(game, profile, reward):
    trans, rew = {}, {}
    for s, picks in profile.items():
        row, r = {}, Fraction(0)
        for a, w in picks:
            r += w * reward.get((s, a), 0)
            for t, p in game.delta[(s, a)]:
                row[t] = row.get(t, 0) + w * p
        trans[s], rew[s] = row, r
    return trans, rew


def worst_case(game, theta, reward, low: bool):
    """Inf (``low``) or sup of the expected total reward at the initial state."""
    best = None
    for prof in _profiles(game, theta):
        v = chain_total_reward(game.states, *_chain_of(game, prof, reward))[game.initial]
        if best is None or (v < best if low else v > best):
            best = v
    return best


def game_value(game, reward, ctrl_max: bool):
    """Optimal value: controller optimises, environment opposes (positional)."""
    ctrl = [s for s in game.states if game.is_controller(s)]
    env = [s for s in game.states if not game.is_controller(s)]
    best = None
    for cpick in itertools.product(*(game.actions(s) for s in ctrl)):
        worst = None
        for epick in itertools.product(*(game.actions(s) for s in env)):
            prof = {s: [(a, Fraction(1))] for s, a in zip(ctrl + env, cpick + epick)}
            v = chain_total_reward(game.states, *_chain_of(game, prof, reward))[game.initial]
            if worst is None or (v < worst if ctrl_max else v > worst):
                worst = v
        if best is None or (worst > best if ctrl_max else worst < best):
            best = worst
    return best


def exact_static_penalty(game, theta, psi):
    total = Fraction(0)
    for s in game.controller_states:
        for B, w in theta.choice[s]:
            total += w * sum((psi.get((s, a), 0) for a in game.actions(s) if a not in B), Fraction(0))
    return total


def exact_dynamic_penalty(game, theta, psi):
    pen = {}
    for s in game.controller_states:
        lp = sum((w * sum((psi.get((s, a), 0) for a in game.actions(s) if a not in B), Fraction(0))
                  for B, w in theta.choice[s]), Fraction(0))
        for a in game.actions(s):
            pen[(s, a)] = lp
    return worst_case(game, theta, pen, low=False)


def knapsack_dp(values, weights, W) -> Fraction:
    """Best total value of an item set with integer weight at most ``W``."""
    best = [Fraction(0)] * (int(W) + 1)
    for v, w in zip(values, weights):
        w = int(w)
        for cap in range(int(W), w - 1, -1):
            best[cap] = max(best[cap], best[cap - w] + v)
    return best[int(W)]


# --- random models ---------------------------------------------------------------


def _rand_dist(rng, targets, max_den=8):
    k = rng.choice([1, 1, 2, 2, 3])
    succ = rng.sample(targets, min(k, len(targets)))
    if len(succ) == 1:
        return [(succ[0], Fraction(1))]
    den = rng.randint(len(succ), max_den)
    cuts = sorted(rng.sample(range(1, den), len(succ) - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
    return [(t, Fraction(p, den)) for t, p in zip(succ, parts)]


def random_model(seed: int, n_ctrl=(1, 5), n_env=(0, 2), max_actions=3, max_space=400):
    """Small random game with reward ``r`` and penalties, finite under cooperation.

    ``max_space`` caps the number of deterministic multi-strategies so that
    exhaustive enumeration stays cheap.
    """
    rng = random.Random(seed)
    while True:
        nc = rng.randint(*n_ctrl)
        ne = rng.randint(*n_env)
        names = [f"c{i}" for i in range(nc)] + [f"e{i}" for i in range(ne)]
        b = GameBuilder()
        for s in names:
            b.state(s, "controller" if s.startswith("c") else "environment")
        reward, psi = {}, {}
        space = 1
        for s in names:
            k = rng.randint(1, max_actions if s.startswith("c") else 2)
            if s.startswith("c"):
                space *= 2**k - 1
            for j in range(k):
                a = f"a{j}"
                b.trans(s, a, _rand_dist(rng, names))
                if rng.random() < 0.5:
                    reward[(s, a)] = Fraction(rng.randint(1, 8), rng.choice([1, 2, 4]))
                if s.startswith("c") and rng.random() < 0.7:
                    psi[(s, a)] = Fraction(rng.randint(1, 4), rng.choice([1, 2]))
        if space > max_space:
            continue
        game = b.build()
        r = RewardStructure("r", reward)
        if not finite_reward_check(game, r):
            continue
        return Model(game, {"r": r}, psi)


def random_instance_args(seed: int):
    """``(model, property)`` with a threshold near the interesting range."""
    rng = random.Random(seed * 7919 + 1)
    model = random_model(seed)
    lower = rng.random() < 0.5
    r = model.rewards["r"].values
    v = game_value(model.game, r, ctrl_max=lower)
    if lower:
        b = Fraction(rng.randint(0, 10), 8) * v if v != INF else Fraction(rng.randint(0, 40), 4)
    else:
        top = worst_case(model.game, MultiStrategy.allow_all(model.game), r, low=False)
        if top == INF:
            top = v + 4
        b = v + Fraction(rng.randint(-1, 8), 8) * (top - v)
        b = max(b, Fraction(0))
    b = Fraction(b).limit_denominator(64)
    return model, Property("reward", ">=" if lower else "<=", b, reward="r")


def random_multistrategy(game, seed: int, M: int = 10) -> MultiStrategy:
    """Support-<=2 granularity-M multi-strategy."""
    rng = random.Random(seed)
    choice = {}
    for s in game.controller_states:
        acts = game.actions(s)
        subs = [frozenset(c) for k in range(1, len(acts) + 1) for c in itertools.combinations(acts, k)]
        if rng.random() < 0.4:
            choice[s] = [(rng.choice(subs), Fraction(1))]
        else:
            B, C = rng.sample(subs, 2) if len(subs) > 1 else (subs[0], subs[0])
            k = rng.randint(1, M - 1)
            choice[s] = [(B, Fraction(k, M)), (C, Fraction(M - k, M))]
    return MultiStrategy.from_distributions(choice)


__all__ = ["INF", "chain_total_reward", "worst_case", "game_value", "exact_static_penalty",
           "exact_dynamic_penalty", "knapsack_dp", "random_model", "random_instance_args",
           "random_multistrategy", "STATIC", "DYNAMIC", "PenaltyScheme"]
