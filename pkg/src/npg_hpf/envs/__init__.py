from npg_hpf.envs.base import (
    EnvSpec,
    Environment,
    EpisodeOverError,
    InvalidActionError,
    StepResult,
)
from npg_hpf.envs.matrix import PAYOFF, MatrixGame, matrix_game_step
from npg_hpf.envs.predator_prey import (
    PRESETS,
    Action,
    PredatorPrey,
    PredatorPreyConfig,
    PredatorPreyState,
    make_predator_prey,
)

ENV_NAMES = ("matrix", *PRESETS)


def make_env(name: str) -> Environment:
    """Return a new environment by name: 'matrix', 'pp' or 'pp-small'."""
    if name == "matrix":
        return MatrixGame()
    if name in PRESETS:
        return make_predator_prey(name)
    raise ValueError(f"Unknown environment '{name}', expected one of {ENV_NAMES}")


__all__ = [
    "Action",
    "ENV_NAMES",
    "EnvSpec",
    "Environment",
    "EpisodeOverError",
    "InvalidActionError",
    "MatrixGame",
    "PAYOFF",
    "PredatorPrey",
    "PredatorPreyConfig",
    "PredatorPreyState",
    "StepResult",
    "make_env",
    "matrix_game_step",
]
