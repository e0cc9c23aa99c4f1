import itertools
from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_instance_args, random_multistrategy
from permissive import analysis as an
from permissive import fixtures as fx
from permissive.game import DYNAMIC, STATIC, GameBuilder, MultiStrategy, PenaltyScheme, Property, gen_knapsack_game
from permissive.milp import (
    DecodeError,
    EncodeOptions,
    EncodingError,
    compute_c,
    decode_solution,
    encode_dynamic,
    encode_static,
    encode_transformed_static,
    parse_solution,
    parse_varmap,
    rational_gcd,
    rescale,
    solve_milp,
    write_lp,
    write_solution,
    write_varmap,
)
from permissive.problem import Instance, make_instance
from permissive.randomized import gadget_instance, rand_to_det, transformed_static_penalty
from permissive.solver import brute_force_det


def robot_inst(b=5, kind=STATIC):
    m = fx.robot()
    return make_instance(m.game, Property("reward", "<=", F(b), reward="moves"), m.penalty(kind), m.rewards)


def solve_decode(model, vm, game):
    status, a, obj = solve_milp(model)
    assert status == "optimal"
    return decode_solution(a, vm, game, model), a


def fix_binaries(model, values):
    out = []
    for v in model.variables:
        if v.name in values:
            out.append(replace(v, lb=float(values[v.name]), ub=float(values[v.name])))
        else:
            out.append(v)
    return replace(model, variables=tuple(out))


def test_rescale_robot():
    sc = rescale(robot_inst())
    assert sc.r_max == F(91, 6)
    assert sc.kappa_r == F(3, 91)
    assert sc.threshold == F(15, 91)
    assert sc.kappa_psi == 1


def test_rescale_penalty_factor():
    assert rational_gcd([F(1, 2), F(3)]) == F(1, 2)
    assert rational_gcd([]) == 1
    t = fx.two_branches()
    inst = make_instance(t.game, fx.TWO_BRANCHES_PROPERTY, PenaltyScheme({}), t.rewards)
    assert rescale(inst).kappa_psi == 1


def test_static_robot_decodes_to_example():
    inst = robot_inst()
    model, vm = encode_static(inst)
    dec, _ = solve_decode(model, vm, inst.game)
    assert dec.theta == fx.robot_example_multistrategy()
    assert abs(dec.penalty_scaled - 1) <= 1e-6
    model, vm = encode_static(robot_inst(16))
    dec, _ = solve_decode(model, vm, inst.game)
    assert dec.theta == MultiStrategy.allow_all(inst.game)


def test_static_two_branches_is_one():
    t = fx.two_branches()
    inst = make_instance(t.game, fx.TWO_BRANCHES_PROPERTY, t.penalty(STATIC), t.rewards)
    model, vm = encode_static(inst)
    dec, _ = solve_decode(model, vm, inst.game)
    assert an.static_penalty(dec.theta, inst.psi, inst.game) == 1
    assert dec.theta.allowed("s") == {"a1"}


def test_single_action_game_has_no_penalty_terms():
    b = GameBuilder().state("a").state("b")
    b.trans("a", "go", {"b": 1}).trans("b", "stay", {"b": 1})
    from permissive.game import Model, RewardStructure

    m = Model(b.build(), {"r": RewardStructure("r", {("a", "go"): F(1)})}, {})
    inst = make_instance(m.game, Property("reward", ">=", F(1), reward="r"), m.penalty(), m.rewards)
    model, vm = encode_static(inst)
    assert [n for n, _ in model.objective] == [vm[("x", "a")]]
    dec, a = solve_decode(model, vm, inst.game)
    assert all(a[vm[("y", s, act)]] == 1 for s, act in [("a", "go"), ("b", "stay")])


def test_dynamic_chained_choices_matches_oracle():
    g = fx.nested_counterexample()
    inst = make_instance(g.game, fx.NESTED_PROPERTY, g.penalty(DYNAMIC), g.rewards)
    model, vm = encode_dynamic(inst)
    dec, _ = solve_decode(model, vm, inst.game)
    best = brute_force_det(inst)
    pen = an.dynamic_penalty(inst.game, dec.theta, inst.psi)
    assert abs(pen - best.penalty) <= 1e-6 and abs(best.penalty - 2) <= 1e-9


def test_dynamic_allow_all_sound_gives_zero():
    model, vm = encode_dynamic(robot_inst(16, DYNAMIC))
    dec, _ = solve_decode(model, vm, robot_inst().game)
    assert abs(dec.penalty_scaled) <= 1e-9


def test_dynamic_knapsack_single_item():
    game, reward, psi, prop = gen_knapsack_game([F(1, 2)], [3], F(1, 2), 3)
    inst = Instance(game, game, reward, prop, psi)
    model, vm = encode_dynamic(inst)
    dec, _ = solve_decode(model, vm, game)
    assert abs(an.dynamic_penalty(game, dec.theta, psi) - 3) <= 1e-6


def test_compute_c():
    b = GameBuilder().state("s").state("t")
    b.trans("s", "a", {"s": F(1, 2), "t": F(1, 2)}).trans("s", "b", {"t": 1}).trans("t", "x", {"t": 1})
    game = b.build()
    assert compute_c(game, PenaltyScheme({("s", "a"): F(1)}, DYNAMIC)) == pytest.approx(6)
    assert compute_c(game, PenaltyScheme({}, DYNAMIC)) == 1
    g = fx.nested_counterexample()
    # every transition is Dirac: the series is 0 and the fallback |S| * sum(psi) is used
    assert compute_c(g.game, g.penalty(DYNAMIC)) == 5 * 2
    with pytest.raises(EncodingError):
        compute_c(game, PenaltyScheme({}, STATIC))


def test_dynamic_rejects_nonpositive_c():
    with pytest.raises(EncodingError):
        encode_dynamic(robot_inst(5, DYNAMIC), EncodeOptions(c=0))


def test_bounds_optimisation_fixes_absorbing_state():
    inst = robot_inst()
    model, vm = encode_static(inst, EncodeOptions(bounds=True))
    v = model.variable(vm[("x", "s5")])
    assert v.lb == 0 and v.ub == 0
    dec, _ = solve_decode(model, vm, inst.game)
    assert dec.theta == fx.robot_example_multistrategy()


def test_zero_penalty_optimisation():
    inst = robot_inst()
    base, _ = encode_static(inst)
    model, _ = encode_static(inst, EncodeOptions(zero_penalty=True))
    assert len(model.constraints) == len(base.constraints)  # unit penalties everywhere
    b = GameBuilder().state("s").state("t")
    b.trans("s", "a", {"t": 1}).trans("s", "b", {"t": 1}).trans("s", "c", {"t": 1}).trans("t", "x", {"t": 1})
    from permissive.game import Model, RewardStructure

    m = Model(b.build(), {"r": RewardStructure("r", {("s", "a"): F(1)})}, {("s", "c"): F(1)})
    inst = make_instance(m.game, Property("reward", "<=", F(1), reward="r"), m.penalty(), m.rewards)
    base, _ = encode_static(inst)
    model, vm = encode_static(inst, EncodeOptions(zero_penalty=True))
    extra = model.constraints[len(base.constraints):]
    assert len(extra) == 1
    assert {n for n, _ in extra[0].coeffs} == {vm[("y", "s", "a")], vm[("y", "s", "b")]}
    dec, _ = solve_decode(model, vm, inst.game)
    assert an.check_sound(inst.game, dec.theta, inst.prop, {"r": inst.reward}).sound


def test_lp_text_layout():
    model, vm = encode_static(robot_inst())
    text = write_lp(model)
    heads = [ln for ln in text.splitlines() if ln and not ln.startswith(" ") and not ln.startswith("\\")]
    assert heads == ["Minimize", "Subject To", "Bounds", "Binary", "End"]
    assert " c1: x_s0 <= " in text
    assert "y_s0_east" in text and "be_" not in text  # upper bounds use the mirrored form
    low, _ = encode_static(make_instance(fx.two_branches().game, fx.TWO_BRANCHES_PROPERTY, fx.two_branches().penalty(),
                                         fx.two_branches().rewards))
    assert "be_s_a1_t1" in write_lp(low) and "ga_s" in write_lp(low)


def test_varmap_and_solution_round_trip():
    model, vm = encode_static(robot_inst())
    back = parse_varmap(write_varmap(vm))
    assert back.by_name == vm.by_name and back.scaling == vm.scaling and back.kind == vm.kind
    _, a, _ = solve_milp(model)
    assert parse_solution(write_solution(a)) == pytest.approx(a)
    assert parse_solution("# comment\nx 1\n\n") == {"x": 1.0}
    with pytest.raises(DecodeError):
        parse_solution("x 1 2\n")


def test_decode_errors():
    inst = robot_inst()
    model, vm = encode_static(inst)
    _, a, _ = solve_milp(model)
    bad = dict(a)
    bad[vm[("y", "s0", "east")]] = 0
    bad[vm[("y", "s0", "south")]] = 0
    with pytest.raises(DecodeError, match="no action allowed"):
        decode_solution(bad, vm, inst.game)
    bad = dict(a)
    bad[vm[("y", "s0", "east")]] = 0.5
    with pytest.raises(DecodeError, match="not binary"):
        decode_solution(bad, vm, inst.game)
    ones = {n: 1.0 for n, role in vm.by_name.items() if role[0] == "y"}
    assert decode_solution(ones, vm, inst.game).theta == MultiStrategy.allow_all(inst.game)


def test_transformed_objective_robot():
    inst = robot_inst()
    ginst, mapping = gadget_instance(inst, 10)
    model, vm = encode_transformed_static(ginst, mapping, inst)
    status, a, obj = solve_milp(model)
    assert status == "optimal"
    dec = decode_solution(a, vm, ginst.game, model)
    pen = transformed_static_penalty(dec.theta, mapping, inst.psi)
    assert pen <= F(7, 10)
    assert abs(dec.penalty_scaled - float(pen)) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_transformed_objective_matches_gadget_penalty(gseed, tseed):
    model, prop = random_instance_args(gseed)
    inst = make_instance(model.game, prop, model.penalty(STATIC), model.rewards)
    M = 4
    ginst, mapping = gadget_instance(inst, M)
    theta = random_multistrategy(inst.game, tseed, M)
    theta2 = rand_to_det(theta, mapping, ginst.game)
    milp_model, vm = encode_transformed_static(ginst, mapping, inst)
    fixed = {vm[("y", s, a)]: int(a in theta2.allowed(s)) for s in ginst.game.controller_states
             for a in ginst.game.actions(s)}
    status, a, obj = solve_milp(fix_binaries(milp_model, fixed))
    if status != "optimal":
        # theta itself is unsound, so the constraints cannot be met
        assert not an.check_sound(ginst.game, theta2, ginst.prop, {ginst.reward.name: ginst.reward}).sound
        return
    dec = decode_solution(a, vm, ginst.game, milp_model)
    assert abs(dec.penalty_scaled - float(transformed_static_penalty(theta2, mapping, inst.psi))) <= 1e-6
    assert transformed_static_penalty(theta2, mapping, inst.psi) == an.static_penalty(theta, inst.psi, inst.game)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([STATIC, DYNAMIC]))
def test_milp_optimum_matches_brute_force(seed, kind):
    model, prop = random_instance_args(seed)
    inst = make_instance(model.game, prop, model.penalty(kind), model.rewards)
    best = brute_force_det(inst)
    milp_model, vm = (encode_static if kind == STATIC else encode_dynamic)(inst)
    status, a, _ = solve_milp(milp_model)
    if best is None:
        assert status == "infeasible"
        return
    if best.penalty == float("inf"):
        # infinite penalties lie beyond the big-M bound
        assert status == "infeasible"
        return
    assert status == "optimal"
    dec = decode_solution(a, vm, inst.game, milp_model)
    assert an.check_sound(model.game, dec.theta, prop, model.rewards).sound
    pen = an.penalty(inst.game, dec.theta, inst.psi)
    if kind == STATIC:
        assert pen == best.penalty
    else:
        assert abs(pen - best.penalty) <= 1e-6
    assert abs(dec.penalty_scaled - float(pen)) <= 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_ranking_decreases_along_zero_reward_edges(seed):
    model, prop = random_instance_args(seed)
    if not prop.lower_bound:
        prop = Property("reward", ">=", prop.threshold, reward="r")
    inst = make_instance(model.game, prop, model.penalty(STATIC), model.rewards)
    milp_model, vm = encode_static(inst)
    status, a, _ = solve_milp(milp_model)
    if status != "optimal":
        return
    S = len(inst.game.states)
    for role, name in vm.by_role.items():
        if role[0] != "beta" or round(a[name]) != 1:
            continue
        _, s, act, t = role
        if inst.reward(s, act) == 0 and s != t:
            assert a[vm[("gamma", t)]] <= a[vm[("gamma", s)]] - 1 / S + 1e-7


def test_every_feasible_assignment_is_sound():
    # enumerate all y patterns of the two-branch game and check each feasible one
    t = fx.two_branches()
    inst = make_instance(t.game, fx.TWO_BRANCHES_PROPERTY, t.penalty(STATIC), t.rewards)
    milp_model, vm = encode_static(inst)
    ys = [n for n, role in vm.by_name.items() if role[0] == "y"]
    for bits in itertools.product([0, 1], repeat=len(ys)):
        status, a, _ = solve_milp(fix_binaries(milp_model, dict(zip(ys, bits))))
        if status == "optimal":
            dec = decode_solution(a, vm, inst.game)
            assert an.check_sound(t.game, dec.theta, fx.TWO_BRANCHES_PROPERTY, t.rewards).sound
