#
# Copyright © 2026 Genome Research Ltd. All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

"""The interface of a cooperative, partially observable multi-agent
environment with a shared team reward.

To define a new environment, subclass 'Environment' and implement `reset`,
`step`, `observations`, `state` and `avail_actions`. Every environment is
a deterministic function of the seed given to `reset` and of the sequence
of joint actions given to `step`.
"""


class InvalidActionError(ValueError):
    """An exception raised when a joint action has the wrong number of
    entries or an entry outside the action space."""

    pass


class EpisodeOverError(RuntimeError):
    """An exception raised when an environment is stepped after its episode
    has ended."""

    pass


@dataclass(frozen=True)
class EnvSpec:
    """The dimensions of an environment."""

    n_agents: int
    n_actions: int
    obs_width: int
    state_width: int
    episode_limit: int

    def __post_init__(self):
        for name in (
            "n_agents",
            "n_actions",
            "obs_width",
            "state_width",
            "episode_limit",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer: {value}")


@dataclass(frozen=True)
class StepResult:
    """The outcome of one joint step. The reward is shared by all agents."""

    reward: float
    terminated: bool
    truncated_by_limit: bool
    next_observations: np.ndarray
    next_state: np.ndarray

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated_by_limit


class Environment(ABC):
    """A Dec-POMDP environment."""

    spec: EnvSpec

    @abstractmethod
    def reset(self, seed: int = None) -> tuple[np.ndarray, np.ndarray]:
        """Start a new episode.

        Returns:
            The per-agent observations, shape (n_agents, obs_width), and the
            global state, shape (state_width,).
        """
        raise NotImplementedError

    @abstractmethod
    def step(self, actions: Sequence[int]) -> StepResult:
        """Apply one joint action, one entry per agent."""
        raise NotImplementedError

    @abstractmethod
    def observations(self) -> np.ndarray:
        """The current observations, shape (n_agents, obs_width)."""
        raise NotImplementedError

    @abstractmethod
    def state(self) -> np.ndarray:
        """The current global state, shape (state_width,)."""
        raise NotImplementedError

    def avail_actions(self) -> np.ndarray:
        """The currently available actions, shape (n_agents, n_actions), 1 for
        available. All actions are available unless overridden."""
        return np.ones((self.spec.n_agents, self.spec.n_actions), dtype=np.int8)

    def check_actions(self, actions: Sequence[int]) -> np.ndarray:
        """Validate a joint action and return it as an integer array."""
        actions = np.asarray(actions)
        if actions.shape != (self.spec.n_agents,):
            raise InvalidActionError(
                f"Expected {self.spec.n_agents} actions, got shape "
                f"{actions.shape}"
            )
        if not np.issubdtype(actions.dtype, np.integer):
            raise InvalidActionError(f"Actions must be integers: {actions}")
        if np.any(actions < 0) or np.any(actions >= self.spec.n_actions):
            raise InvalidActionError(
                f"Actions must be in [0, {self.spec.n_actions}): {actions}"
            )
        return actions.astype(np.int64)
