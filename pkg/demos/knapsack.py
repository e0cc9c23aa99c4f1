"""Knapsack instances solved as permissive synthesis problems, checked
against dynamic programming."""

import random
from fractions import Fraction

from permissive.game import gen_knapsack_game
from permissive.problem import Instance
from permissive.solver import solve_native


def knapsack(values, weights, W):
    best = [Fraction(0)] * (W + 1)
    for v, w in zip(values, weights):
        for cap in range(W, w - 1, -1):
            best[cap] = max(best[cap], best[cap - w] + v)
    return best[W]


rng = random.Random(7)
for _ in range(8):
    n = rng.randint(2, 6)
    values = [Fraction(rng.randint(1, 8), 8) for _ in range(n)]
    weights = [rng.randint(1, 4) for _ in range(n)]
    W = rng.randint(1, sum(weights))
    V = knapsack(values, weights, W)
    game, reward, psi, prop = gen_knapsack_game(values, weights, V, W)
    inc = solve_native(Instance(game, game, reward, prop, psi)).incumbent
    print(f"n={n} W={W} best value {V}: penalty {inc.penalty:.4f} <= {float(Fraction(W, n)):.4f}"
          f" -> {inc.penalty <= W / n + 1e-9}")
