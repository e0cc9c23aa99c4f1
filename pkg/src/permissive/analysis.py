"""Expected total reward on games, soundness checks and penalty evaluation.

Everything runs on a *compiled* view of a game: one row per enabled
``(state, action)`` pair with a transition matrix ``P`` and a reward vector.
A state's Bellman update is a weighted sum over *groups*; each group takes the
min or the max over a set of pairs.  Plain games have one group per state.
A randomised multi-strategy contributes one group per allowed action set,
weighted by its probability, which is exactly the mixed operator

    x_s = sum_B theta(s)(B) * opt_{a in B} (r(s,a) + sum_t delta(s,a)(t) x_t).

Least fixed points are enforced by pinning the zero-value region to 0 before
iterating; infinite values are detected on the graph before any iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .game import (
    DYNAMIC,
    STATIC,
    MemorylessStrategy,
    ModelError,
    MultiStrategy,
    PenaltyScheme,
    Property,
    RewardStructure,
    StochasticGame,
    lift_to_reduced,
    local_penalty,
    reduce_reachability,
)

MIN = "min"
MAX = "max"

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10**6
SOUND_TOL = 1e-7


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveMode:
    controller: str
    environment: str

    def __post_init__(self):
        if self.controller not in (MIN, MAX) or self.environment not in (MIN, MAX):
            raise ValueError(f"objective must use min/max, got {self}")


@dataclass
class ValueVector:
    states: tuple[str, ...]
    values: np.ndarray
    converged: bool
    iterations: int

    def __getitem__(self, state: str) -> float:
        return float(self.values[self.states.index(state)])

    def as_dict(self) -> dict[str, float]:
        return {s: float(v) for s, v in zip(self.states, self.values)}

    def infinite(self) -> list[str]:
        return [s for s, v in zip(self.states, self.values) if np.isinf(v)]


class CompiledGame:
    """Array view of a game: pair rows, successor matrix, state owners."""

    def __init__(self, game: StochasticGame):
        self.game = game
        self.n = len(game.states)
        idx = game.index
        self.pair_state: list[int] = []
        self.pair_action: list[str] = []
        self.pair_index: dict[tuple[str, str], int] = {}
        rows, cols, vals = [], [], []
        self.state_pairs: list[list[int]] = [[] for _ in range(self.n)]
        for s in game.states:
            for a in game.actions(s):
                p = len(self.pair_state)
                self.pair_index[(s, a)] = p
                self.pair_state.append(idx[s])
                self.pair_action.append(a)
                self.state_pairs[idx[s]].append(p)
                for t, q in game.delta[(s, a)]:
                    rows.append(p)
                    cols.append(idx[t])
                    vals.append(float(q))
        self.m = len(self.pair_state)
        self.pair_state_arr = np.array(self.pair_state, dtype=np.int64)
        self.sparse = csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))
        self.succ = [self.sparse.indices[self.sparse.indptr[p]:self.sparse.indptr[p + 1]]
                     for p in range(self.m)]
        self.dense = self.sparse.toarray() if self.m * self.n <= 4_000_000 else None
        self.is_ctrl = np.array([game.is_controller(s) for s in game.states])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ x
        return self.sparse @ x

    def rewards(self, reward) -> np.ndarray:
        """Per-pair reward vector from a RewardStructure or a ``(s, a) -> value`` mapping."""
        values = reward.values if isinstance(reward, RewardStructure) else reward
        out = np.zeros(self.m)
        for key, v in values.items():
            p = self.pair_index.get(key)
            if p is not None:
                out[p] = float(v)
        return out


def compile_game(game: StochasticGame) -> CompiledGame:
    cg = game.__dict__.get("_compiled")
    if cg is None:
        cg = CompiledGame(game)
        object.__setattr__(game, "_compiled", cg)
    return cg


@dataclass
class Groups:
    """Flattened groups: owner state, weight, op, and member pair ranges."""

    state: np.ndarray
    weight: np.ndarray
    is_max: np.ndarray
    members: np.ndarray
    starts: np.ndarray

    @property
    def count(self) -> int:
        return len(self.state)

    def member_group(self) -> np.ndarray:
        sizes = np.diff(np.append(self.starts, len(self.members)))
        return np.repeat(np.arange(self.count), sizes)


class GroupBuilder:
    def __init__(self):
        self.state, self.weight, self.is_max, self.members, self.starts = [], [], [], [], []

    def add(self, s: int, w: float, is_max: bool, pairs: Sequence[int]):
        if w <= 0:
            return
        self.state.append(s)
        self.weight.append(w)
        self.is_max.append(is_max)
        self.starts.append(len(self.members))
        self.members.extend(pairs)

    def build(self) -> Groups:
        return Groups(
            np.array(self.state, dtype=np.int64),
            np.array(self.weight, dtype=float),
            np.array(self.is_max, dtype=bool),
            np.array(self.members, dtype=np.int64),
            np.array(self.starts, dtype=np.int64),
        )


def plain_groups(cg: CompiledGame, mode: ObjectiveMode) -> Groups:
    gb = GroupBuilder()
    for i in range(cg.n):
        op = mode.controller if cg.is_ctrl[i] else mode.environment
        gb.add(i, 1.0, op == MAX, cg.state_pairs[i])
    return gb.build()


def strategy_groups(
    cg: CompiledGame,
    theta: MultiStrategy,
    ctrl_op: str,
    env_op: str,
    relaxed: Mapping[str, str] | None = None,
) -> Groups:
    """Groups for ``theta``; states listed in ``relaxed`` ignore theta and use the given op over all actions."""
    gb = GroupBuilder()
    game = cg.game
    for i, s in enumerate(game.states):
        if not cg.is_ctrl[i]:
            gb.add(i, 1.0, env_op == MAX, cg.state_pairs[i])
            continue
        if relaxed is not None and s in relaxed:
            gb.add(i, 1.0, relaxed[s] == MAX, cg.state_pairs[i])
            continue
        dist = theta.choice.get(s)
        if dist is None:
            raise ModelError(f"multi-strategy undefined at controller state {s!r}")
        for allowed, w in dist:
            try:
                pairs = [cg.pair_index[(s, a)] for a in sorted(allowed)]
            except KeyError as e:
                raise ModelError(f"action {e.args[0][1]!r} not enabled at {s}") from None
            gb.add(i, float(w), ctrl_op == MAX, pairs)
    return gb.build()


# --- qualitative graph analysis ---------------------------------------------


def _groups_ok(groups: Groups, entry_ok: np.ndarray) -> np.ndarray:
    vals = entry_ok.astype(np.int8)
    anyv = np.maximum.reduceat(vals, groups.starts)
    allv = np.minimum.reduceat(vals, groups.starts)
    return np.where(groups.is_max, allv, anyv).astype(bool)


def _bad_states(cg: CompiledGame, groups: Groups, group_ok: np.ndarray) -> np.ndarray:
    bad = np.bincount(groups.state, weights=(~group_ok).astype(float), minlength=cg.n)
    return bad > 0


def _leaves(cg: CompiledGame, inside: np.ndarray) -> np.ndarray:
    """Per pair: does some successor lie outside ``inside``?"""
    return cg.sparse @ (~inside).astype(float) > 0


def zero_region(cg: CompiledGame, groups: Groups, rvec: np.ndarray) -> np.ndarray:
    """States whose value is 0: min groups can keep zero reward forever, max groups cannot escape it."""
    z = np.ones(cg.n, dtype=bool)
    if groups.count == 0:
        return z
    while True:
        pair_ok = (rvec == 0) & ~_leaves(cg, z)
        gok = _groups_ok(groups, pair_ok[groups.members])
        nz = z & ~_bad_states(cg, groups, gok)
        if (nz == z).all():
            return z
        z = nz


def _group_owner_graph(cg: CompiledGame, groups: Groups, entry_alive: np.ndarray, node_alive: np.ndarray):
    """Expanded graph: nodes 0..n-1 are states, n..n+G-1 are groups."""
    G = groups.count
    mg = groups.member_group()
    src, dst = [], []
    # state -> its groups
    alive_g = node_alive[cg.n + np.arange(G)] & node_alive[groups.state]
    src.append(groups.state[alive_g])
    dst.append(cg.n + np.arange(G)[alive_g])
    # group -> successors of alive member pairs
    for k in np.nonzero(entry_alive)[0]:
        p = groups.members[k]
        succ = cg.succ[p]
        src.append(np.full(len(succ), cg.n + mg[k]))
        dst.append(succ)
    src = np.concatenate(src) if src else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64)
    N = cg.n + G
    return csr_matrix((np.ones(len(src)), (src, dst)), shape=(N, N))


def end_components(cg: CompiledGame, groups: Groups) -> tuple[np.ndarray, np.ndarray]:
    """Maximal end components of the game where every choice cooperates.

    Returns ``(state_alive, entry_alive)``: states inside some end component and
    group member entries usable to stay inside it.
    """
    G = groups.count
    mg = groups.member_group()
    node_alive = np.ones(cg.n + G, dtype=bool)
    entry_alive = np.ones(len(groups.members), dtype=bool)
    while True:
        graph = _group_owner_graph(cg, groups, entry_alive, node_alive)
        _, comp = connected_components(graph, directed=True, connection="strong")
        new_entry = entry_alive.copy()
        for k in np.nonzero(entry_alive)[0]:
            g = cg.n + mg[k]
            succ = cg.succ[groups.members[k]]
            if not node_alive[g] or (~node_alive[succ]).any() or (comp[succ] != comp[g]).any():
                new_entry[k] = False
        new_node = node_alive.copy()
        has_entry = np.bincount(mg[new_entry], minlength=G) > 0
        gnodes = cg.n + np.arange(G)
        g_dead = ~has_entry | (comp[gnodes] != comp[groups.state]) | ~node_alive[groups.state]
        new_node[gnodes[g_dead]] = False
        st_dead = np.bincount(groups.state, weights=g_dead.astype(float), minlength=cg.n) > 0
        new_node[: cg.n] &= ~st_dead
        # a state with no groups at all cannot stay anywhere
        no_groups = np.bincount(groups.state, minlength=cg.n) == 0
        new_node[: cg.n] &= ~no_groups
        if (new_entry == entry_alive).all() and (new_node == node_alive).all():
            return node_alive[: cg.n], entry_alive
        entry_alive, node_alive = new_entry, new_node


def _can_reach(cg: CompiledGame, groups: Groups, goal: np.ndarray) -> np.ndarray:
    """States that reach ``goal`` with positive probability when every choice cooperates."""
    reach = goal.copy()
    while True:
        pair_hits = cg.sparse @ reach.astype(float) > 0
        ghit = np.maximum.reduceat(pair_hits[groups.members].astype(np.int8), groups.starts).astype(bool)
        st = np.bincount(groups.state, weights=ghit.astype(float), minlength=cg.n) > 0
        new = reach | st
        if (new == reach).all():
            return reach
        reach = new


def cooperative_infinite(cg: CompiledGame, groups: Groups, rvec: np.ndarray) -> np.ndarray:
    """States from which cooperating players can collect unbounded reward."""
    st_alive, entry_alive = end_components(cg, groups)
    positive = entry_alive & (rvec[groups.members] > 0)
    if not positive.any():
        return np.zeros(cg.n, dtype=bool)
    mg = groups.member_group()
    goal = np.zeros(cg.n, dtype=bool)
    goal[groups.state[mg[positive]]] = True
    return _can_reach(cg, groups, goal)


def almost_sure_reach(cg: CompiledGame, groups: Groups, goal: np.ndarray) -> np.ndarray:
    """States from which cooperating choices reach ``goal`` with probability 1."""
    u = np.ones(cg.n, dtype=bool)
    while True:
        entry_ok = ~_leaves(cg, u)[groups.members]
        gok = np.maximum.reduceat(entry_ok.astype(np.int8), groups.starts).astype(bool)
        alive = u & ~_bad_states(cg, groups, gok)
        reach = goal & u
        while True:
            hits = (cg.sparse @ reach.astype(float) > 0)[groups.members] & entry_ok
            ghit = np.maximum.reduceat(hits.astype(np.int8), groups.starts).astype(bool)
            st = (np.bincount(groups.state, weights=ghit.astype(float), minlength=cg.n) > 0) & alive
            new = reach | st
            if (new == reach).all():
                break
            reach = new
        nu = reach & (alive | goal)
        if (nu == u).all():
            return u
        u = nu


# --- value iteration ----------------------------------------------------------


def _group_values(q: np.ndarray, groups: Groups) -> np.ndarray:
    qm = q[groups.members]
    gmin = np.minimum.reduceat(qm, groups.starts)
    gmax = np.maximum.reduceat(qm, groups.starts)
    return np.where(groups.is_max, gmax, gmin)


def _bellman(cg: CompiledGame, groups: Groups, rvec: np.ndarray, x: np.ndarray, inf_pairs: np.ndarray):
    # infinite successors are handled through inf_pairs
    q = rvec + cg.matvec(np.where(np.isinf(x), 0.0, x))
    if inf_pairs.any():
        q[inf_pairs] = np.inf
    gv = _group_values(q, groups)
    with np.errstate(invalid="ignore"):
        contrib = groups.weight * gv
    return np.bincount(groups.state, weights=contrib, minlength=cg.n), q


def _greedy_choice(q: np.ndarray, groups: Groups) -> np.ndarray:
    """Index (into ``groups.members``) of an optimal member per group."""
    qm = q[groups.members]
    ends = np.append(groups.starts[1:], len(groups.members))
    out = np.empty(groups.count, dtype=np.int64)
    for g in range(groups.count):
        seg = qm[groups.starts[g]:ends[g]]
        k = int(np.argmax(seg)) if groups.is_max[g] else int(np.argmin(seg))
        out[g] = groups.starts[g] + k
    return out


def _polish(cg, groups, rvec, x, free, inf_pairs, tol):
    """Solve the linear system of the greedy policy; return it if it is a fixed point."""
    _, q = _bellman(cg, groups, rvec, x, inf_pairs)
    choice = _greedy_choice(q, groups)
    pairs = groups.members[choice]
    if np.isinf(q[pairs][free[groups.state]]).any():
        return None
    fidx = np.nonzero(free)[0]
    pos = -np.ones(cg.n, dtype=np.int64)
    pos[fidx] = np.arange(len(fidx))
    k = len(fidx)
    A = np.eye(k)
    b = np.zeros(k)
    P = cg.dense if cg.dense is not None else cg.sparse.toarray()
    for g in range(groups.count):
        s = groups.state[g]
        if not free[s]:
            continue
        w = groups.weight[g]
        p = pairs[g]
        i = pos[s]
        b[i] += w * rvec[p]
        row = P[p]
        A[i, :] -= w * row[fidx]
        # pinned successors contribute their fixed value
        b[i] += w * float(row[~free] @ np.where(np.isinf(x[~free]), 0.0, x[~free]))
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(sol).all() or (sol < -tol).any():
        return None
    if np.linalg.cond(A) > 1e12:
        return None
    y = x.copy()
    y[fidx] = np.maximum(sol, 0.0)
    ty, _ = _bellman(cg, groups, rvec, y, inf_pairs)
    if np.max(np.abs(ty[free] - y[free]), initial=0.0) > max(tol, 1e-12) * 10:
        return None
    return y


def solve_values(
    cg: CompiledGame,
    groups: Groups,
    rvec: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    infinite: np.ndarray | None = None,
    polish: bool = True,
    stop=None,
) -> ValueVector:
    """Least fixed point of the grouped Bellman operator.

    ``infinite`` marks states already known to have value +inf.  ``stop`` is an
    optional predicate on the current iterate (always a lower bound) that ends
    iteration early.
    """
    inf = np.zeros(cg.n, dtype=bool) if infinite is None else infinite
    zero = zero_region(cg, groups, rvec) & ~inf
    free = ~(zero | inf)
    x = np.zeros(cg.n)
    x[inf] = np.inf
    inf_pairs = cg.sparse @ inf.astype(float) > 0
    xs = np.where(inf, 0.0, x)
    it = 0
    next_polish = 8
    converged = not free.any()
    while not converged and it < max_iter:
        it += 1
        nx, _ = _bellman(cg, groups, rvec, xs, inf_pairs)
        nx[~free] = 0.0
        nx[inf] = np.inf
        diff = np.max(np.abs(np.where(free, nx - np.where(inf, 0, xs), 0.0)))
        newly_inf = free & np.isinf(nx)
        xs = np.where(np.isinf(nx), 0.0, nx)
        if newly_inf.any():
            # only reachable through pairs already marked infinite
            inf = inf | newly_inf
            free = free & ~newly_inf
            inf_pairs = cg.sparse @ inf.astype(float) > 0
            x = np.where(inf, np.inf, xs)
            continue
        x = np.where(inf, np.inf, xs)
        if stop is not None and stop(x):
            return ValueVector(cg.game.states, x, False, it)
        if diff < tol:
            converged = True
            break
        if polish and it >= next_polish:
            next_polish *= 2
            y = _polish(cg, groups, rvec, x, free, inf_pairs, tol)
            if y is not None and (y[free] >= x[free] - 1e-9 * np.maximum(1, np.abs(x[free]))).all():
                x = y
                converged = True
                break
    if converged and polish and free.any():
        y = _polish(cg, groups, rvec, x, free, inf_pairs, tol)
        if y is not None and np.max(np.abs(y[free] - x[free])) < 1e-6 * max(1.0, np.max(np.abs(x[free]))):
            x = y
    return ValueVector(cg.game.states, x, converged, it)


# --- public operations --------------------------------------------------------


def finite_reward_check(game: StochasticGame, reward) -> bool:
    """True iff no play, with both players cooperating, collects unbounded reward."""
    cg = compile_game(game)
    groups = plain_groups(cg, ObjectiveMode(MAX, MAX))
    return not cooperative_infinite(cg, groups, cg.rewards(reward)).any()


def _values(cg, groups, rvec, tol, max_iter, all_max, all_min):
    if all_max:
        inf = cooperative_infinite(cg, groups, rvec)
    elif all_min:
        zero = zero_region(cg, groups, rvec)
        inf = ~almost_sure_reach(cg, groups, zero)
    else:
        inf = None
    return solve_values(cg, groups, rvec, tol, max_iter, infinite=inf)


def total_reward_values(
    game: StochasticGame,
    reward,
    mode: ObjectiveMode,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueVector:
    cg = compile_game(game)
    groups = plain_groups(cg, mode)
    rvec = cg.rewards(reward)
    all_max = mode.controller == MAX and mode.environment == MAX
    all_min = mode.controller == MIN and mode.environment == MIN
    if not (all_max or all_min) and not finite_reward_check(game, reward):
        raise AnalysisError("rewards are not finite under cooperation; mixed objectives need finite rewards")
    return _values(cg, groups, rvec, tol, max_iter, all_max, all_min)


WORST_LOW = "worst-low"
WORST_HIGH = "worst-high"


def worst_case_reward(
    game: StochasticGame,
    theta: MultiStrategy,
    reward,
    direction: str = WORST_LOW,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueVector:
    """Inf (worst-low) or sup (worst-high) of the expected reward over compliant strategies and all opponents."""
    if direction not in (WORST_LOW, WORST_HIGH):
        raise ValueError(f"direction must be {WORST_LOW} or {WORST_HIGH}")
    cg = compile_game(game)
    op = MIN if direction == WORST_LOW else MAX
    groups = strategy_groups(cg, theta, op, op)
    rvec = cg.rewards(reward)
    return _values(cg, groups, rvec, tol, max_iter, op == MAX, op == MIN)


@dataclass(frozen=True)
class Soundness:
    sound: bool
    value: float
    margin: float

    def __bool__(self):
        return self.sound


def reward_view(game: StochasticGame, prop: Property, rewards: Mapping[str, RewardStructure] | None = None):
    """Game and reward on which ``prop`` becomes a total-reward bound.

    Returns ``(game', reward, sink)`` where ``sink`` is None for reward properties.
    """
    if prop.kind == "reach":
        target = game.resolve(prop.target)
        return reduce_reachability(game, target)
    if rewards is None or prop.reward not in rewards:
        raise ModelError(f"unknown reward structure {prop.reward!r}")
    return game, rewards[prop.reward], None


def check_sound(
    game: StochasticGame,
    theta: MultiStrategy,
    prop: Property,
    rewards: Mapping[str, RewardStructure] | None = None,
    tol: float = SOUND_TOL,
) -> Soundness:
    rgame, reward, sink = reward_view(game, prop, rewards)
    if sink is not None:
        theta = lift_to_reduced(theta, rgame)
    b = float(prop.threshold)
    if prop.lower_bound:
        v = worst_case_reward(rgame, theta, reward, WORST_LOW)[rgame.initial]
        return Soundness(v >= b - tol, v, v - b)
    v = worst_case_reward(rgame, theta, reward, WORST_HIGH)[rgame.initial]
    return Soundness(v <= b + tol, v, b - v)


def static_penalty(theta: MultiStrategy, psi: PenaltyScheme, game: StochasticGame) -> Fraction:
    if psi.kind != STATIC:
        raise ModelError("static_penalty needs a static penalty scheme")
    return sum((local_penalty(theta, s, psi, game) for s in game.controller_states), Fraction(0))


def penalty_reward(game: StochasticGame, theta: MultiStrategy, psi: PenaltyScheme) -> dict:
    """Reward charging every controller visit its local penalty."""
    out = {}
    for s in game.controller_states:
        lp = local_penalty(theta, s, psi, game)
        if lp:
            for a in game.actions(s):
                out[(s, a)] = lp
    return out


def dynamic_penalty(game: StochasticGame, theta: MultiStrategy, psi: PenaltyScheme) -> float:
    if psi.kind != DYNAMIC:
        raise ModelError("dynamic_penalty needs a dynamic penalty scheme")
    return worst_case_reward(game, theta, penalty_reward(game, theta, psi), WORST_HIGH)[game.initial]


def penalty(game: StochasticGame, theta: MultiStrategy, psi: PenaltyScheme):
    """Static penalty as an exact Fraction, dynamic as a float (possibly inf)."""
    if psi.kind == STATIC:
        return static_penalty(theta, psi, game)
    return dynamic_penalty(game, theta, psi)


# --- classical synthesis ------------------------------------------------------


def _progress_choice(cg, groups, rvec, x, q, zero):
    """Optimal member per group that also makes progress towards reward.

    Among optimal members of max groups, zero-reward loops can tie with the
    real exit; choosing members that lead towards already settled states
    avoids them.  Groups inside the zero region pick a pair keeping reward 0.
    """
    scale = max(1.0, float(np.max(np.abs(np.where(np.isfinite(x), x, 0)))))
    eps = 1e-9 * scale
    ends = np.append(groups.starts[1:], len(groups.members))
    gval = _group_values(q, groups)
    zero_ok = (rvec == 0) & ~_leaves(cg, zero)
    chosen: dict[int, int] = {}
    opt = {}
    for g in range(groups.count):
        seg = groups.members[groups.starts[g]:ends[g]]
        opt[g] = [p for p in seg if q[p] == gval[g] or abs(q[p] - gval[g]) <= eps]
        if zero[groups.state[g]]:
            keep = [p for p in seg if zero_ok[p]]
            chosen[g] = keep[0] if keep else opt[g][0]
        elif not groups.is_max[g]:
            chosen[g] = opt[g][0]
        else:
            for p in opt[g]:
                if rvec[p] > 0 or np.isinf(q[p]):
                    chosen[g] = p
                    break
    while len(chosen) < groups.count:
        settled = zero.copy()
        open_states = {groups.state[g] for g in range(groups.count) if g not in chosen}
        for s in range(cg.n):
            if s not in open_states:
                settled[s] = True
        progress = False
        for g in range(groups.count):
            if g in chosen:
                continue
            for p in opt[g]:
                if settled[cg.succ[p]].any():
                    chosen[g] = p
                    progress = True
                    break
        if not progress:
            for g in range(groups.count):
                chosen.setdefault(g, opt[g][0])
    return chosen


def synthesise(
    game: StochasticGame,
    prop: Property,
    rewards: Mapping[str, RewardStructure] | None = None,
    tol: float = DEFAULT_TOL,
):
    """Optimal memoryless deterministic controller strategy for ``prop``.

    Returns ``(strategy, value, sound)``; the value is the optimal bound the
    controller can guarantee from the initial state.
    """
    rgame, reward, sink = reward_view(game, prop, rewards)
    mode = ObjectiveMode(MAX, MIN) if prop.lower_bound else ObjectiveMode(MIN, MAX)
    cg = compile_game(rgame)
    groups = plain_groups(cg, mode)
    rvec = cg.rewards(reward)
    if not finite_reward_check(rgame, reward):
        raise AnalysisError("synthesis needs rewards that stay finite under cooperation")
    vv = solve_values(cg, groups, rvec, tol)
    x = vv.values
    inf_pairs = cg.sparse @ np.isinf(x).astype(float) > 0
    _, q = _bellman(cg, groups, rvec, np.where(np.isinf(x), 0, x), inf_pairs)
    zero = zero_region(cg, groups, rvec)
    chosen = _progress_choice(cg, groups, rvec, x, q, zero)
    choice = {}
    for g, p in chosen.items():
        s = rgame.states[groups.state[g]]
        if s in game.index and game.is_controller(s):
            choice[s] = {cg.pair_action[p]: Fraction(1)}
    for s in game.controller_states:
        if s not in choice or choice[s].keys() - set(game.actions(s)):
            choice[s] = {game.actions(s)[0]: Fraction(1)}
    value = float(x[cg.game.index[rgame.initial]])
    b = float(prop.threshold)
    sound = value >= b - SOUND_TOL if prop.lower_bound else value <= b + SOUND_TOL
    return MemorylessStrategy(choice), value, sound
