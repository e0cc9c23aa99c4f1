"""Anytime branch-and-bound over multi-strategies, brute-force oracles and
verification of externally solved MILPs.

The search fixes one decision state at a time.  A node is pruned when

* even an optimistic completion is unsound: undecided states are played by
  the controller in its own favour (max for lower bounds, min for upper
  bounds), which bounds every completion, or
* no completion can beat the incumbent: committed static penalty, or for
  dynamic penalties the worst-case penalty of a relaxed game where undecided
  states cost nothing and move in the cheapest way.

Leaves are visited in a fixed order (decision states by descending total
penalty, allowed sets largest first).  An incumbent is replaced only by a
strictly better one, so the final answer is the first optimal leaf in that
order; the brute-force oracles enumerate in the same order.
"""

from __future__ import annotations

import itertools
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import analysis as an
from .analysis import MAX, MIN, SOUND_TOL
from .game import STATIC, ModelError, MultiStrategy, PenaltyScheme, nonempty_subsets
from .milp import MilpModel, VarMap, decode_solution, parse_solution
from .problem import Instance
from .randomized import B1, B2, SPLIT, GadgetMapping, det_to_rand, gadget_instance, subset_for

BRUTE_FORCE_LIMIT = 10**7
DYN_EPS = 1e-9
RELAXED_MAX_ITER = 20000


class BudgetError(ValueError):
    pass


@dataclass
class Incumbent:
    theta: MultiStrategy  # on the user's game
    penalty: object  # Fraction (static) or float (dynamic)
    margin: float
    timestamp: float
    optimal: bool = False
    encoded: MultiStrategy | None = None  # on the searched game


@dataclass
class SearchResult:
    incumbent: Incumbent | None
    optimal: bool
    timed_out: bool
    nodes: int = 0


@dataclass
class Candidate:
    assign: dict  # searched-game state -> set distribution
    penalty: Fraction  # static penalty contributed (original scale)


@dataclass
class Slot:
    state: str
    candidates: list[Candidate]


def _order_states(inst: Instance, states):
    psi = inst.psi
    game = inst.game
    pos = {s: i for i, s in enumerate(game.states)}
    return sorted(states, key=lambda s: (-psi.total(game, s), pos[s]))


def det_candidates(inst: Instance, s: str) -> list[frozenset]:
    game, psi = inst.game, inst.psi
    acts = game.actions(s)
    order = {a: i for i, a in enumerate(acts)}
    subs = nonempty_subsets(acts)

    def miss(B):
        return sum((psi(s, a) for a in acts if a not in B), Fraction(0))

    return sorted(subs, key=lambda B: (-len(B), miss(B), sorted(order[a] for a in B)))


def rand_distributions(inst: Instance, s: str, M: int, nested: bool) -> list[tuple]:
    """Granularity-M distributions with support <= 2 at ``s`` (lowest penalty first)."""
    game, psi = inst.game, inst.psi
    acts = game.actions(s)
    subs = det_candidates(inst, s)
    out = [((B, Fraction(1)),) for B in subs]
    for B, C in itertools.combinations(subs, 2):
        if nested and not (B <= C or C <= B):
            continue
        for k in range(1, M):
            out.append(((B, Fraction(k, M)), (C, Fraction(M - k, M))))

    def pen(dist):
        return sum((w * sum((psi(s, a) for a in acts if a not in B), Fraction(0)) for B, w in dist), Fraction(0))

    idx = {id(d): i for i, d in enumerate(out)}
    return sorted(out, key=lambda d: (pen(d), idx[id(d)]))


class _Evaluator:
    """Soundness, penalties and relaxed bounds on the searched game."""

    def __init__(self, inst: Instance, dyn_psi: PenaltyScheme | None):
        self.inst = inst
        self.game = inst.game
        self.cg = an.compile_game(inst.game)
        self.rvec = self.cg.rewards(inst.reward)
        self.b = float(inst.threshold)
        self.lower = inst.lower_bound
        self.i0 = self.game.index[self.game.initial]
        self.dyn_psi = dyn_psi

    def sound(self, theta: MultiStrategy):
        op = MIN if self.lower else MAX
        groups = an.strategy_groups(self.cg, theta, op, op)
        v = an._values(self.cg, groups, self.rvec, an.DEFAULT_TOL, an.DEFAULT_MAX_ITER,
                       op == MAX, op == MIN).values[self.i0]
        if self.lower:
            return v >= self.b - SOUND_TOL, v - self.b
        return v <= self.b + SOUND_TOL, self.b - v

    def dynamic(self, theta: MultiStrategy) -> float:
        return an.dynamic_penalty(self.game, theta, self.dyn_psi)

    def may_be_sound(self, partial: MultiStrategy, undecided) -> bool:
        """False only when every completion of ``partial`` is unsound."""
        if self.lower:
            relaxed = {s: MAX for s in undecided}
            groups = an.strategy_groups(self.cg, partial, MIN, MIN, relaxed)
            inf = an.cooperative_infinite(self.cg, groups, self.rvec)
            if inf[self.i0]:
                return True
            vv = an.solve_values(self.cg, groups, self.rvec, infinite=inf, max_iter=RELAXED_MAX_ITER)
            return not (vv.converged and vv.values[self.i0] < self.b - SOUND_TOL)
        relaxed = {s: MIN for s in undecided}
        groups = an.strategy_groups(self.cg, partial, MAX, MAX, relaxed)
        limit = self.b + SOUND_TOL
        vv = an.solve_values(self.cg, groups, self.rvec, polish=False, max_iter=RELAXED_MAX_ITER,
                             stop=lambda x: x[self.i0] > limit)
        return not vv.values[self.i0] > limit

    def dynamic_lower_bound(self, partial: MultiStrategy, undecided, cutoff: float) -> float:
        relaxed = {s: MIN for s in undecided}
        groups = an.strategy_groups(self.cg, partial, MAX, MAX, relaxed)
        decided = MultiStrategy({s: d for s, d in partial.choice.items() if s not in relaxed})
        reward = {}
        for s, d in decided.choice.items():
            lp = sum((w * sum((self.dyn_psi(s, a) for a in self.game.actions(s) if a not in B), Fraction(0))
                      for B, w in d), Fraction(0))
            if lp:
                for a in self.game.actions(s):
                    reward[(s, a)] = lp
        rvec = self.cg.rewards(reward)
        vv = an.solve_values(self.cg, groups, rvec, polish=False, max_iter=RELAXED_MAX_ITER,
                             stop=lambda x: x[self.i0] >= cutoff)
        return float(vv.values[self.i0])


class _Shared:
    def __init__(self, kind, on_improve, t0):
        self.lock = threading.Lock()
        self.best = None  # (penalty, index, theta_encoded, margin)
        self.kind = kind
        self.on_improve = on_improve
        self.t0 = t0

    def eps(self):
        return 0 if self.kind == STATIC else DYN_EPS

    def can_improve(self, bound, prefix) -> bool:
        best = self.best
        if best is None:
            return True
        pen, idx = best[0], best[1]
        if bound < pen - self.eps():
            return True
        if bound <= pen + self.eps() and tuple(prefix) < idx[:len(prefix)]:
            return True
        return False

    def offer(self, pen, idx, theta, margin):
        with self.lock:
            best = self.best
            strict = best is None or pen < best[0] - self.eps()
            tie = best is not None and not strict and abs(pen - best[0]) <= self.eps() and tuple(idx) < best[1]
            if not (strict or tie):
                return
            self.best = (pen, tuple(idx), theta, margin)
        if strict and self.on_improve is not None:
            self.on_improve(pen, theta, margin)


class BranchAndBound:
    def __init__(self, inst: Instance, slots: list[Slot], fixed: dict, dyn_psi, kind: str,
                 deadline: float | None, on_improve):
        self.inst = inst
        self.slots = slots
        self.fixed = fixed
        self.kind = kind
        self.ev = _Evaluator(inst, dyn_psi)
        self.deadline = deadline
        self.timed_out = False
        self.nodes = 0
        self.shared = _Shared(kind, on_improve, time.monotonic())
        self.first = [0] * len(slots)

    def _theta(self, chosen: list[int]) -> MultiStrategy:
        choice = dict(self.fixed)
        for slot, k in zip(self.slots, chosen):
            choice.update(slot.candidates[k].assign)
        return MultiStrategy(choice)

    def _partial(self, chosen):
        choice = dict(self.fixed)
        for slot, k in zip(self.slots, chosen):
            choice.update(slot.candidates[k].assign)
        undecided = [s for slot in self.slots[len(chosen):] for s in slot.candidates[0].assign]
        return MultiStrategy(choice), undecided

    def _leaf(self, chosen):
        theta = self._theta(chosen)
        ok, margin = self.ev.sound(theta)
        if not ok:
            return False
        if self.kind == STATIC:
            pen = sum((slot.candidates[k].penalty for slot, k in zip(self.slots, chosen)), Fraction(0))
        else:
            pen = self.ev.dynamic(theta)
        self.shared.offer(pen, chosen, theta, margin)
        return True

    def _expired(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            self.timed_out = True
        return self.timed_out

    def explore(self, chosen: list[int]):
        if self._expired():
            return
        self.nodes += 1
        depth = len(chosen)
        if depth == len(self.slots):
            self._leaf(chosen)
            return
        committed = sum((slot.candidates[k].penalty for slot, k in zip(self.slots, chosen)), Fraction(0))
        if self.kind == STATIC and not self.shared.can_improve(committed, chosen):
            return
        partial, undecided = self._partial(chosen)
        if depth > 0 and undecided and not self.ev.may_be_sound(partial, undecided):
            return
        if self.kind == STATIC:
            # the first completion costs nothing more, so it is the best leaf below
            first = list(chosen) + self.first[depth:]
            if self._leaf(first):
                return
        elif depth > 0 and self.shared.best is not None:
            best = self.shared.best[0]
            lb = self.ev.dynamic_lower_bound(partial, undecided, best - DYN_EPS)
            if not self.shared.can_improve(lb, chosen):
                return
        for k in range(len(self.slots[depth].candidates)):
            self.explore(chosen + [k])
            if self.timed_out:
                return

    def run(self, jobs: int = 1) -> SearchResult:
        if not self.slots:
            self._leaf([])
        elif jobs <= 1:
            self.explore([])
        else:
            # root branches in parallel, sharing the incumbent
            self.nodes += 1
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(lambda k: self.explore([k]), range(len(self.slots[0].candidates))))
        best = self.shared.best
        optimal = not self.timed_out
        if best is None:
            return SearchResult(None, optimal, self.timed_out, self.nodes)
        pen, _, theta, margin = best
        inc = Incumbent(theta, pen, margin, time.monotonic() - self.shared.t0, optimal, theta)
        return SearchResult(inc, optimal, self.timed_out, self.nodes)


def _fixed_and_slots_det(inst: Instance):
    fixed = {}
    game = inst.game
    decision = inst.decision_states()
    for s in game.controller_states:
        if s not in decision:
            fixed[s] = ((frozenset(game.actions(s)), Fraction(1)),)
    slots = []
    for s in _order_states(inst, decision):
        cands = []
        for B in det_candidates(inst, s):
            miss = sum((inst.psi(s, a) for a in game.actions(s) if a not in B), Fraction(0))
            cands.append(Candidate({s: ((B, Fraction(1)),)}, miss))
        slots.append(Slot(s, cands))
    return fixed, slots


def _gadget_assignment(dist, s, mapping: GadgetMapping):
    from .randomized import _split_sets

    A1, k, A2 = _split_sets(dist, mapping.M)
    g1, g2 = mapping.gadgets[s]
    first = subset_for(mapping.M, k)
    assign = {s: ((frozenset([SPLIT]), Fraction(1)),),
              g1: ((frozenset(A1), Fraction(1)),), g2: ((frozenset(A2), Fraction(1)),)}
    for i, sel in enumerate(mapping.selectors[s], start=1):
        assign[sel] = ((frozenset([B1 if i in first else B2]), Fraction(1)),)
    return assign


def _dist_penalty(inst, s, dist):
    acts = inst.game.actions(s)
    return sum((w * sum((inst.psi(s, a) for a in acts if a not in B), Fraction(0)) for B, w in dist), Fraction(0))


def _fixed_and_slots_rand(inst: Instance, ginst: Instance, mapping: GadgetMapping, nested: bool):
    fixed = {}
    gg = ginst.game
    decision = set(inst.decision_states())
    for s in inst.game.controller_states:
        if s not in decision:
            fixed.update(_gadget_assignment(((frozenset(inst.game.actions(s)), Fraction(1)),), s, mapping))
    for s in gg.controller_states:
        if s not in fixed and not any(s in _gadget_states(mapping, d) for d in decision):
            fixed[s] = ((frozenset(gg.actions(s)), Fraction(1)),)
    slots = []
    for s in _order_states(inst, list(decision)):
        cands = [Candidate(_gadget_assignment(d, s, mapping), _dist_penalty(inst, s, d))
                 for d in rand_distributions(inst, s, mapping.M, nested)]
        slots.append(Slot(s, cands))
    return fixed, slots


def _gadget_states(mapping, s):
    return {s, *mapping.gadgets[s], *mapping.selectors[s]}


def solve_native(
    inst: Instance,
    time_limit: float | None = None,
    on_improve: Callable | None = None,
    randomised: bool = False,
    M: int | None = None,
    nested: bool | None = None,
    jobs: int = 1,
) -> SearchResult:
    """Optimally permissive sound multi-strategy by branch and bound.

    With ``randomised`` the search runs on the granularity-``M`` gadget game
    and the result is mapped back to a randomised multi-strategy.  ``nested``
    restricts randomised supports to nested pairs (default: static only).
    ``on_improve(penalty, theta, margin)`` sees every strictly better
    incumbent, with ``theta`` on the searched game.
    """
    if time_limit is not None and time_limit <= 0:
        raise BudgetError("time limit must be positive")
    if not an.finite_reward_check(inst.game, inst.reward) and not inst.lower_bound:
        # upper bounds on rewards that may be infinite are still fine to search
        pass
    deadline = None if time_limit is None else time.monotonic() + time_limit
    kind = inst.kind
    if not randomised:
        fixed, slots = _fixed_and_slots_det(inst)
        bb = BranchAndBound(inst, slots, fixed, inst.psi, kind, deadline, on_improve)
        res = bb.run(jobs)
        if res.incumbent is not None:
            res.incumbent.theta = inst.lift(res.incumbent.encoded)
        return res
    if M is None or M < 1:
        raise ValueError("randomised search needs a granularity M >= 1")
    if nested is None:
        nested = kind == STATIC
    ginst, mapping = gadget_instance(inst, M)
    fixed, slots = _fixed_and_slots_rand(inst, ginst, mapping, nested)
    bb = BranchAndBound(ginst, slots, fixed, ginst.psi, kind, deadline, on_improve)
    res = bb.run(jobs)
    if res.incumbent is not None:
        res.incumbent.theta = inst.lift(det_to_rand(res.incumbent.encoded, mapping))
    return res


# --- oracles -----------------------------------------------------------------


def _space_size(counts) -> int:
    return math.prod(counts) if counts else 1


def _enumerate(inst: Instance, per_state: list[tuple[str, list]], fixed: dict, kind: str):
    """First strictly best sound leaf of the product, in product order."""
    ev = _Evaluator(inst, inst.psi)
    best = None
    states = [s for s, _ in per_state]
    for combo in itertools.product(*(c for _, c in per_state)):
        choice = dict(fixed)
        for s, dist in zip(states, combo):
            choice[s] = dist
        theta = MultiStrategy(choice)
        if kind == STATIC:
            pen = sum((_dist_penalty(inst, s, d) for s, d in zip(states, combo)), Fraction(0))
            if best is not None and pen >= best[0]:
                continue
            ok, margin = ev.sound(theta)
            if ok:
                best = (pen, theta, margin)
        else:
            ok, margin = ev.sound(theta)
            if not ok:
                continue
            pen = ev.dynamic(theta)
            if best is None or pen < best[0] - DYN_EPS:
                best = (pen, theta, margin)
    if best is None:
        return None
    return Incumbent(inst.lift(best[1]), best[0], best[2], 0.0, True, best[1])


def brute_force_det(inst: Instance) -> Incumbent | None:
    """Exhaustive optimum over deterministic multi-strategies."""
    fixed, slots = _fixed_and_slots_det(inst)
    size = _space_size([len(sl.candidates) for sl in slots])
    if size > BRUTE_FORCE_LIMIT:
        raise BudgetError(f"{size} deterministic multi-strategies exceed the brute-force limit")
    per_state = [(sl.state, [c.assign[sl.state] for c in sl.candidates]) for sl in slots]
    return _enumerate(inst, per_state, fixed, inst.kind)


def brute_force_rand(inst: Instance, M: int, nested: bool | None = None) -> Incumbent | None:
    """Exhaustive optimum over granularity-M multi-strategies with support at most 2.

    Evaluated directly on the original game with the randomised Bellman
    operator (no gadget game).  Static search keeps nested pairs only.
    """
    if nested is None:
        nested = inst.kind == STATIC
    decision = inst.decision_states()
    if len(decision) > 3 or M > 100 or any(len(inst.game.actions(s)) > 3 for s in decision):
        raise BudgetError("brute_force_rand is limited to 3 decision states, 3 actions and M <= 100")
    fixed = {s: ((frozenset(inst.game.actions(s)), Fraction(1)),)
             for s in inst.game.controller_states if s not in decision}
    per_state = [(s, rand_distributions(inst, s, M, nested)) for s in _order_states(inst, decision)]
    size = _space_size([len(c) for _, c in per_state])
    if size > BRUTE_FORCE_LIMIT:
        raise BudgetError(f"{size} candidates exceed the brute-force limit")
    return _enumerate(inst, per_state, fixed, inst.kind)


# --- external solutions ------------------------------------------------------


class ImportRejected(ModelError):
    pass


def import_solution(text: str, varmap: VarMap, inst: Instance, model: MilpModel | None = None,
                    mapping: GadgetMapping | None = None, encoded_game=None) -> Incumbent:
    """Decode an external MILP solution and re-verify it independently.

    ``encoded_game`` is the game the MILP was built for (the gadget game for
    randomised runs).  The reported objective must match the recomputed
    penalty within 1e-5.
    """
    game = encoded_game if encoded_game is not None else inst.game
    assignment = parse_solution(text)
    if model is not None:
        for v in model.variables:
            if v.kind != "binary" and v.name not in assignment:
                assignment[v.name] = v.lb
    dec = decode_solution(assignment, varmap, game, model)
    theta_enc = dec.theta
    if mapping is not None:
        from .randomized import transformed_static_penalty

        theta = det_to_rand(theta_enc, mapping)
        if inst.kind == STATIC:
            pen = transformed_static_penalty(theta_enc, mapping, inst.psi)
        else:
            pen = an.dynamic_penalty(inst.game, theta, inst.psi)
    else:
        theta = theta_enc
        pen = an.penalty(inst.game, theta, inst.psi)
    ok = an.check_sound(inst.game, theta, inst.prop, {inst.reward.name: inst.reward})
    if not ok.sound:
        raise ImportRejected(f"decoded multi-strategy is unsound: value {ok.value:.9g}, margin {ok.margin:.3g}")
    if model is not None and not math.isnan(dec.penalty_scaled) and not math.isinf(float(pen)):
        if abs(dec.penalty_scaled - float(pen)) > 1e-5:
            raise ImportRejected(
                f"reported penalty {dec.penalty_scaled:.9g} differs from recomputed {float(pen):.9g}")
    return Incumbent(inst.lift(theta), pen, ok.margin, 0.0, False, theta_enc)
