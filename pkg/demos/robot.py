"""Robot on a grid: classical strategy, then deterministic and randomised
permissive multi-strategies for an upper bound on expected moves."""

from fractions import Fraction

from permissive import analysis as an
from permissive import fixtures as fx
from permissive.game import DYNAMIC, STATIC, Property
from permissive.model_io import write_multistrategy
from permissive.problem import instance_from_model
from permissive.solver import solve_native

model = fx.robot()
prop = Property("reward", "<=", Fraction(5), reward="moves")

strategy, value, sound = an.synthesise(model.game, prop, model.rewards)
print(f"classical strategy: value {value} ({'sound' if sound else 'unsound'})")
for s in model.game.controller_states:
    print(f"  {s}: {strategy.action(s)}")

for kind in (STATIC, DYNAMIC):
    res = solve_native(instance_from_model(model, prop, kind))
    print(f"\n{kind} penalty, deterministic: {res.incumbent.penalty}")
    print(write_multistrategy(res.incumbent.theta), end="")

res = solve_native(instance_from_model(model, prop, STATIC), randomised=True, M=10)
print(f"\nstatic penalty, randomised with M=10: {res.incumbent.penalty}")
print(write_multistrategy(res.incumbent.theta), end="")

loose = Property("reward", "<=", Fraction(16), reward="moves")
res = solve_native(instance_from_model(model, loose, STATIC))
print(f"\nwith a bound of 16 moves nothing needs blocking: penalty {res.incumbent.penalty}")
