"""Small hand-built games used by the tests, demos and acceptance suite."""

from fractions import Fraction

from .game import (
    CONTROLLER,
    ENVIRONMENT,
    GameBuilder,
    Model,
    MultiStrategy,
    Property,
    RewardStructure,
)

F = Fraction


def robot() -> Model:
    """Robot moving on a 2x3 grid towards ``s5``; ``s1`` and ``s4`` are hostile."""
    b = GameBuilder()
    b.state("s0", CONTROLLER).state("s1", ENVIRONMENT).state("s2", CONTROLLER)
    b.state("s3", CONTROLLER).state("s4", ENVIRONMENT).state("s5", CONTROLLER)
    b.trans("s0", "east", {"s1": 1}).trans("s0", "south", {"s3": 1})
    b.trans("s1", "impede", {"s0": F(3, 4), "s2": F(1, 4)}).trans("s1", "pass", {"s2": 1})
    b.trans("s2", "south", {"s5": 1})
    b.trans("s3", "north", {"s0": F(7, 10), "s4": F(3, 10)}).trans("s3", "east", {"s4": 1})
    b.trans("s4", "impede", {"s3": F(3, 5), "s5": F(2, 5)}).trans("s4", "pass", {"s5": 1})
    b.trans("s5", "done", {"s5": 1})
    b.label("goal", "s5")
    moves = [("s0", "east"), ("s0", "south"), ("s2", "south"), ("s3", "north"), ("s3", "east")]
    reward = RewardStructure("moves", {k: F(1) for k in moves})
    return Model(b.build(), {"moves": reward}, {k: F(1) for k in moves})


def robot_example_multistrategy() -> MultiStrategy:
    """Sound for ``R{moves}<=5`` with static penalty 1 (north blocked at s3)."""
    return MultiStrategy.from_sets({
        "s0": ["south", "east"], "s2": ["south"], "s3": ["east"], "s5": ["done"],
    })


def robot_randomised_multistrategy() -> MultiStrategy:
    """Blocks north at s3 only 7 times in 10; static penalty 7/10.

    With probability 7/10 only ``east`` is allowed at s3, otherwise both moves.
    The worst compliant play then needs exactly 5 expected moves.
    """
    return MultiStrategy.from_distributions({
        "s0": [({"south", "east"}, 1)],
        "s2": [({"south"}, 1)],
        "s3": [({"east"}, F(7, 10)), ({"north", "east"}, F(3, 10))],
        "s5": [({"done"}, 1)],
    })


def two_branches() -> Model:
    """Randomisation beats determinism: two absorbing branches, one rewarded, one penalised."""
    b = GameBuilder()
    b.state("s").state("t1").state("t2")
    b.trans("s", "a1", {"t1": 1}).trans("s", "a2", {"t2": 1})
    b.trans("t1", "stay", {"t1": 1}).trans("t2", "stay", {"t2": 1})
    return Model(
        b.build(),
        {"r": RewardStructure("r", {("s", "a1"): F(1)})},
        {("s", "a2"): F(1)},
    )


TWO_BRANCHES_PROPERTY = Property("reward", ">=", F(1, 2), reward="r")


def penalised_loop() -> Model:
    """Penalised self-loop ``a`` next to a rewarded exit ``b``: infimum 0 is never attained."""
    b = GameBuilder()
    b.state("s").state("t")
    b.trans("s", "a", {"s": 1}).trans("s", "b", {"t": 1})
    b.trans("t", "stay", {"t": 1})
    return Model(
        b.build(),
        {"r": RewardStructure("r", {("s", "b"): F(1)})},
        {("s", "a"): F(1)},
    )


PENALISED_LOOP_PROPERTY = Property("reward", ">=", F(1), reward="r")


def nested_counterexample() -> Model:
    """Two chained choices where the best dynamic penalty needs non-nested sets."""
    b = GameBuilder()
    b.state("s0").state("s1")
    b.state("s2", ENVIRONMENT).state("s3", ENVIRONMENT).state("s4", ENVIRONMENT)
    b.trans("s0", "b", {"s1": 1}).trans("s0", "c", {"s2": 1})
    b.trans("s1", "d", {"s3": 1}).trans("s1", "e", {"s4": 1})
    for s in ("s2", "s3", "s4"):
        b.trans(s, "loop", {s: 1})
    b.label("goal", "s3")
    return Model(b.build(), {}, {("s0", "c"): F(1), ("s1", "e"): F(1)})


NESTED_PROPERTY = Property("reach", ">=", F(1, 2), target=("s3",))


def nested_counterexample_multistrategy() -> MultiStrategy:
    return MultiStrategy.from_distributions({
        "s0": [({"b"}, F(1, 2)), ({"c"}, F(1, 2))],
        "s1": [({"d"}, 1)],
    })
