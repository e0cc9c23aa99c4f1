import time
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_dynamic_penalty, exact_static_penalty, random_instance_args
from permissive import analysis as an
from permissive import fixtures as fx
from permissive.game import DYNAMIC, STATIC, GameBuilder, Model, MultiStrategy, Property, RewardStructure
from permissive.milp import encode_dynamic, encode_static, solve_milp, write_solution
from permissive.problem import make_instance
from permissive.solver import (
    BudgetError,
    ImportRejected,
    _Evaluator,
    brute_force_det,
    brute_force_rand,
    det_candidates,
    import_solution,
    rand_distributions,
    solve_native,
)


def inst_of(model, prop, kind=STATIC):
    return make_instance(model.game, prop, model.penalty(kind), model.rewards)


def robot(b=5, kind=STATIC):
    return inst_of(fx.robot(), Property("reward", "<=", F(b), reward="moves"), kind)


def test_robot_static_optimum():
    res = solve_native(robot())
    assert res.optimal and not res.timed_out
    assert res.incumbent.penalty == 1
    assert res.incumbent.theta == fx.robot_example_multistrategy()
    assert brute_force_det(robot()).theta == res.incumbent.theta


def test_robot_allow_all_when_threshold_is_loose():
    res = solve_native(robot(16))
    assert res.incumbent.penalty == 0
    assert res.incumbent.theta == MultiStrategy.allow_all(fx.robot().game)


def test_robot_dynamic_optimum():
    res = solve_native(robot(5, DYNAMIC))
    best = brute_force_det(robot(5, DYNAMIC))
    assert abs(res.incumbent.penalty - best.penalty) <= 1e-6
    assert abs(res.incumbent.penalty - 2.5) <= 1e-6


def test_robot_randomised():
    res = solve_native(robot(), randomised=True, M=10)
    inc = res.incumbent
    assert inc.penalty == F(7, 10)
    assert an.check_sound(fx.robot().game, inc.theta, Property("reward", "<=", F(5), reward="moves"),
                          fx.robot().rewards).sound
    assert exact_static_penalty(fx.robot().game, inc.theta, fx.robot().psi) == F(7, 10)


def test_no_sound_multistrategy():
    assert solve_native(robot(3)).incumbent is None
    assert brute_force_det(robot(3)) is None


def test_reachability_instance_lifts_back():
    m = fx.nested_counterexample()
    res = solve_native(inst_of(m, fx.NESTED_PROPERTY))
    theta = res.incumbent.theta
    assert set(theta.choice) == set(m.game.controller_states)
    assert an.check_sound(m.game, theta, fx.NESTED_PROPERTY).sound
    # a deterministic choice has to block both c and e
    assert res.incumbent.penalty == 2


def test_candidate_orders():
    inst = robot()
    assert det_candidates(inst, "s0")[0] == {"east", "south"}
    assert [len(B) for B in det_candidates(inst, "s3")] == [2, 1, 1]
    dists = rand_distributions(inst, "s3", 2, nested=True)
    pens = [sum(w * (2 - len(B)) for B, w in d) for d in dists]
    assert pens == sorted(pens)
    assert len(rand_distributions(inst, "s3", 2, nested=False)) == 3 + 3
    assert len(rand_distributions(inst, "s3", 2, nested=True)) == 3 + 2


def test_anytime_incumbents_improve_strictly():
    seen = []
    res = solve_native(robot(5), on_improve=lambda pen, theta, margin: seen.append((pen, theta, margin)))
    pens = [p for p, _, _ in seen]
    assert pens == sorted(pens, reverse=True) and len(set(pens)) == len(pens)
    assert pens[-1] == res.incumbent.penalty
    game = fx.robot().game
    for _, theta, margin in seen:
        assert margin >= -1e-7
        assert an.check_sound(game, theta, Property("reward", "<=", F(5), reward="moves"), fx.robot().rewards)


def test_parallel_search_agrees():
    for kind in (STATIC, DYNAMIC):
        one = solve_native(robot(5, kind))
        two = solve_native(robot(5, kind), jobs=3)
        assert two.incumbent.theta == one.incumbent.theta
        assert two.incumbent.penalty == one.incumbent.penalty


def _chain(n):
    """n decision states in a row; expensive to search exhaustively."""
    b = GameBuilder()
    names = [f"s{i}" for i in range(n)] + ["end"]
    for s in names:
        b.state(s)
    rew, psi = {}, {}
    for i in range(n):
        for j, a in enumerate(("a", "b", "c")):
            b.trans(names[i], a, {names[i + 1]: 1})
            rew[(names[i], a)] = F(j + 1)
            psi[(names[i], a)] = F(1 + (i + j) % 3)
    b.trans("end", "stay", {"end": 1})
    return Model(b.build(), {"r": RewardStructure("r", rew)}, psi)


def test_time_limit_is_respected():
    m = _chain(12)
    inst = inst_of(m, Property("reward", "<=", F(21), reward="r"), DYNAMIC)
    t0 = time.monotonic()
    res = solve_native(inst, time_limit=0.5)
    assert time.monotonic() - t0 < 5
    assert res.timed_out and not res.optimal
    with pytest.raises(BudgetError):
        solve_native(inst, time_limit=0)


def test_brute_force_budgets():
    m = _chain(12)
    with pytest.raises(BudgetError):
        brute_force_det(inst_of(m, Property("reward", "<=", F(21), reward="r")))
    with pytest.raises(BudgetError):
        brute_force_rand(robot(), 101)
    with pytest.raises(BudgetError):
        brute_force_rand(inst_of(_chain(4), Property("reward", "<=", F(8), reward="r")), 2)


# pruning rules -------------------------------------------------------------------


def test_allow_all_completion_cannot_justify_pruning():
    # allowing everything at an undecided state is the pessimistic completion in
    # both directions, so its unsoundness says nothing about other completions
    t = fx.two_branches()
    inst = inst_of(t, fx.TWO_BRANCHES_PROPERTY)
    ev = _Evaluator(inst, None)
    assert not ev.sound(MultiStrategy.allow_all(t.game))[0]
    assert ev.may_be_sound(MultiStrategy.allow_all(t.game), ["s"])
    assert solve_native(inst).incumbent.penalty == 1
    r = robot()
    ev = _Evaluator(r, None)
    partial = MultiStrategy.allow_all(r.game)
    assert not ev.sound(partial)[0]
    assert ev.may_be_sound(partial, ["s0", "s3"])


def test_relaxed_bound_prunes_hopeless_nodes():
    r = robot(4)
    ev = _Evaluator(r, None)
    partial = MultiStrategy.from_sets({"s0": ["east"], "s2": ["south"], "s3": ["north", "east"], "s5": ["done"]})
    # east at s0 costs 5 expected moves whatever s3 does; south can get 3.5
    assert not ev.may_be_sound(partial, ["s3"])
    partial = MultiStrategy.from_sets({"s0": ["east"], "s2": ["south"], "s3": ["east"], "s5": ["done"]})
    assert ev.may_be_sound(partial, ["s0"])


def test_allow_all_dynamic_penalty_is_not_a_lower_bound():
    b = GameBuilder().state("s0").state("s1").state("t").state("u")
    b.trans("s0", "b", {"s1": 1}).trans("s0", "c", {"t": 1})
    b.trans("s1", "d", {"u": 1}).trans("s1", "e", {"u": 1})
    b.trans("t", "stay", {"t": 1}).trans("u", "stay", {"u": 1})
    m = Model(b.build(), {"r": RewardStructure("r", {})}, {("s0", "b"): F(1, 10), ("s1", "e"): F(5)})
    inst = inst_of(m, Property("reward", ">=", F(0), reward="r"), DYNAMIC)
    ev = _Evaluator(inst, inst.psi)
    partial = MultiStrategy.from_sets({"s0": ["b", "c"], "s1": ["d"], "t": ["stay"], "u": ["stay"]})
    allow_all_completion = ev.dynamic(partial)
    best = ev.dynamic(MultiStrategy.from_sets({"s0": ["c"], "s1": ["d"], "t": ["stay"], "u": ["stay"]}))
    assert allow_all_completion == pytest.approx(5) and best == pytest.approx(0.1)
    assert ev.dynamic_lower_bound(partial, ["s0"], float("inf")) <= best + 1e-12
    # here nothing needs blocking at all
    assert solve_native(inst).incumbent.penalty == pytest.approx(0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([STATIC, DYNAMIC]))
def test_native_matches_brute_force(seed, kind):
    model, prop = random_instance_args(seed)
    inst = inst_of(model, prop, kind)
    best = brute_force_det(inst)
    res = solve_native(inst)
    assert res.optimal
    if best is None:
        assert res.incumbent is None
        assert not an.synthesise(model.game, prop, model.rewards)[2]
        return
    inc = res.incumbent
    assert an.synthesise(model.game, prop, model.rewards)[2]
    assert an.check_sound(model.game, inc.theta, prop, model.rewards).sound
    if kind == STATIC:
        assert inc.penalty == best.penalty
        assert inc.theta == best.theta
        assert exact_static_penalty(model.game, inc.theta, model.psi) == inc.penalty
    else:
        assert inc.penalty == best.penalty or abs(inc.penalty - best.penalty) <= 1e-6
        exact = exact_dynamic_penalty(model.game, inc.theta, model.psi)
        assert exact == inc.penalty or abs(float(exact) - inc.penalty) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_randomisation_never_hurts(seed):
    model, prop = random_instance_args(seed)
    inst = inst_of(model, prop)
    det = solve_native(inst).incumbent
    rnd = solve_native(inst, randomised=True, M=2).incumbent
    assert (det is None) == (rnd is None)
    if det is not None:
        assert rnd.penalty <= det.penalty
        assert an.check_sound(model.game, rnd.theta, prop, model.rewards).sound


# external solutions ----------------------------------------------------------------


def test_import_accepts_solver_output():
    inst = robot()
    model, vm = encode_static(inst)
    _, a, _ = solve_milp(model)
    inc = import_solution(write_solution(a), vm, inst, model)
    assert inc.theta == fx.robot_example_multistrategy()
    assert inc.penalty == 1


def test_import_rejects_unsound_or_misreported():
    inst = robot()
    model, vm = encode_static(inst)
    ones = {n: 1 for n, role in vm.by_name.items() if role[0] == "y"}
    text = write_solution(ones)
    with pytest.raises(ImportRejected, match="unsound"):
        import_solution(text, vm, inst, model)
    # a dynamic solution that understates the penalty at the initial state
    inst = robot(5, DYNAMIC)
    model, vm = encode_dynamic(inst)
    _, a, _ = solve_milp(model)
    assert import_solution(write_solution(a), vm, inst, model).penalty == pytest.approx(2.5)
    lie = dict(a)
    lie[vm[("z", "s0")]] = 1.0
    with pytest.raises(ImportRejected, match="differs"):
        import_solution(write_solution(lie), vm, inst, model)
