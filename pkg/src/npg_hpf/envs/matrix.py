from typing import Sequence

import numpy as np

from npg_hpf.envs.base import (
    EnvSpec,
    Environment,
    EpisodeOverError,
    StepResult,
)

"The one-step cooperative game; rows are agent 1's action, columns agent 2's."
PAYOFF = np.array(
    [
        [8.0, -12.0, -12.0],
        [-12.0, 3.0, 0.0],
        [-12.0, 0.0, 3.0],
    ]
)

OBS_WIDTH = 2


class MatrixGame(Environment):
    """A two-agent, three-action, single-step game with a fixed payoff table.

    Observations are all-ones vectors and the state is constant, so agents
    can only learn from the joint actions they take.
    """

    def __init__(self, payoff: np.ndarray = PAYOFF):
        payoff = np.asarray(payoff, dtype=np.float64)
        if payoff.ndim != 2 or payoff.shape[0] != payoff.shape[1]:
            raise ValueError(f"Payoff must be a square table: {payoff.shape}")
        self.payoff = payoff
        self.spec = EnvSpec(
            n_agents=2,
            n_actions=payoff.shape[0],
            obs_width=OBS_WIDTH,
            state_width=2 * OBS_WIDTH,
            episode_limit=1,
        )
        self._t = 0

    def reset(self, seed: int = None) -> tuple[np.ndarray, np.ndarray]:
        self._t = 0
        return self.observations(), self.state()

    def step(self, actions: Sequence[int]) -> StepResult:
        if self._t >= self.spec.episode_limit:
            raise EpisodeOverError("The matrix game is a one-step game")
        u1, u2 = self.check_actions(actions)
        self._t += 1

        return StepResult(
            reward=float(self.payoff[u1, u2]),
            terminated=True,
            truncated_by_limit=False,
            next_observations=self.observations(),
            next_state=self.state(),
        )

    def observations(self) -> np.ndarray:
        return np.ones((self.spec.n_agents, OBS_WIDTH), dtype=np.float32)

    def state(self) -> np.ndarray:
        return np.ones(self.spec.state_width, dtype=np.float32)


def matrix_game_step(joint_action: Sequence[int]) -> StepResult:
    """Play the matrix game once from its initial step."""
    game = MatrixGame()
    game.reset()
    return game.step(joint_action)
