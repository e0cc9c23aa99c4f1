"""Small games where randomised multi-strategies behave differently from
deterministic ones."""

from permissive import fixtures as fx
from permissive.game import DYNAMIC, STATIC
from permissive.problem import instance_from_model
from permissive.solver import brute_force_rand, solve_native

# one rewarded and one penalised branch: mixing them halves the penalty
t1 = fx.two_branches()
det = solve_native(instance_from_model(t1, fx.TWO_BRANCHES_PROPERTY, STATIC)).incumbent.penalty
rnd = solve_native(instance_from_model(t1, fx.TWO_BRANCHES_PROPERTY, STATIC), randomised=True, M=2).incumbent.penalty
print(f"two branches: deterministic {det}, randomised M=2 {rnd}")

# a penalised self-loop: every granularity does better, none reaches 0
t2 = fx.penalised_loop()
inst = instance_from_model(t2, fx.PENALISED_LOOP_PROPERTY, STATIC)
for M in (2, 5, 10, 100):
    print(f"self-loop, M={M}: optimum {brute_force_rand(inst, M).penalty}")

# two chained choices: allowing only nested sets costs about sqrt(2)
g = fx.nested_counterexample()
inst = instance_from_model(g, fx.NESTED_PROPERTY, DYNAMIC)
print("chained choices, dynamic penalty:")
print(f"  deterministic        {solve_native(inst).incumbent.penalty:.4f}")
print(f"  nested sets, M=20    {solve_native(inst, randomised=True, M=20, nested=True).incumbent.penalty:.4f}")
print(f"  any two sets, M=10   {brute_force_rand(inst, 10, nested=False).penalty:.4f}")
