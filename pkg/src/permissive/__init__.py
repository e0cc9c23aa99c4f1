"""Permissive controller synthesis for turn-based stochastic games."""

from .analysis import check_sound, dynamic_penalty, penalty, static_penalty, synthesise, total_reward_values, worst_case_reward
from .game import (
    CONTROLLER,
    DYNAMIC,
    ENVIRONMENT,
    STATIC,
    GameBuilder,
    MemorylessStrategy,
    Model,
    ModelError,
    MultiStrategy,
    PenaltyScheme,
    Property,
    RewardStructure,
    StochasticGame,
)
from .model_io import parse_game, parse_multistrategy, parse_property, write_game, write_multistrategy
from .problem import Instance, make_instance
from .solver import brute_force_det, brute_force_rand, solve_native

__version__ = "0.1.0"

__all__ = [
    "CONTROLLER", "DYNAMIC", "ENVIRONMENT", "STATIC",
    "GameBuilder", "Instance", "MemorylessStrategy", "Model", "ModelError", "MultiStrategy",
    "PenaltyScheme", "Property", "RewardStructure", "StochasticGame",
    "brute_force_det", "brute_force_rand", "check_sound", "dynamic_penalty", "make_instance",
    "parse_game", "parse_multistrategy", "parse_property", "penalty", "solve_native",
    "static_penalty", "synthesise", "total_reward_values", "worst_case_reward",
    "write_game", "write_multistrategy",
]
