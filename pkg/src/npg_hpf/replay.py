from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from npg_hpf.agents import NO_ACTION, encode_inputs

"""Episode-granular experience replay.

Episodes are stored whole and sampled uniformly. A sampled batch is padded to
the length of its longest episode; the mask marks the steps that were
actually played.
"""


class MalformedEpisodeError(ValueError):
    """An exception raised when an episode's arrays are inconsistent."""

    pass


class ReplayNotReadyError(RuntimeError):
    """An exception raised when a batch is requested from a buffer holding
    fewer episodes than the batch size."""

    pass


@dataclass
class EpisodeRecord:
    """One played episode of length L.

    Observations, states and available actions have L + 1 entries: one per
    step plus the final one reached after the last action. Actions, rewards,
    terminated flags and policy selections have L entries. Selection rows are
    one-hot over the policies that could act; a single-policy run has one
    column of ones.
    """

    observations: np.ndarray  # (L + 1, n_agents, obs_width)
    states: np.ndarray  # (L + 1, state_width)
    avail_actions: np.ndarray  # (L + 1, n_agents, n_actions)
    actions: np.ndarray  # (L, n_agents)
    rewards: np.ndarray  # (L,)
    terminated: np.ndarray  # (L,)
    selection: np.ndarray  # (L, n_policies)
    truncated: bool = False

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards))

    def validate(self):
        """Check the episode's shapes and its end.

        Raises:
            MalformedEpisodeError: If any array is inconsistent with the
                others, or the episode does not end exactly once.
        """
        n = self.length
        if n < 1:
            raise MalformedEpisodeError("An episode must have at least one step")

        expected = {
            "observations": n + 1,
            "states": n + 1,
            "avail_actions": n + 1,
            "rewards": n,
            "terminated": n,
            "selection": n,
        }
        for name, rows in expected.items():
            value = getattr(self, name)
            if len(value) != rows:
                raise MalformedEpisodeError(
                    f"Episode {name} has {len(value)} rows, expected {rows}"
                )

        n_agents = self.actions.shape[1] if self.actions.ndim == 2 else None
        if (
            n_agents is None
            or self.observations.ndim != 3
            or self.observations.shape[1] != n_agents
            or self.avail_actions.ndim != 3
            or self.avail_actions.shape[1] != n_agents
        ):
            raise MalformedEpisodeError(
                f"Episode agent axes disagree: actions {self.actions.shape}, "
                f"observations {self.observations.shape}, available actions "
                f"{self.avail_actions.shape}"
            )
        if np.any(self.actions < 0) or np.any(
            self.actions >= self.avail_actions.shape[2]
        ):
            raise MalformedEpisodeError("Episode actions out of range")

        selection = np.asarray(self.selection)
        if selection.ndim != 2 or not np.all(
            (selection.sum(axis=1) == 1) & np.isin(selection, (0, 1)).all(axis=1)
        ):
            raise MalformedEpisodeError(
                "Every episode step must select exactly one policy"
            )

        ends = int(np.count_nonzero(self.terminated)) + int(self.truncated)
        if ends != 1:
            raise MalformedEpisodeError(
                f"An episode must end exactly once, found {ends} ends"
            )
        if not self.truncated and not self.terminated[-1]:
            raise MalformedEpisodeError(
                "An episode must terminate at its last step"
            )


@dataclass
class EpisodeBatch:
    """b episodes padded to a common length T.

    Padded steps have mask 0, reward 0 and are not terminal; their available
    actions are all ones so that masked argmaxes stay well defined.
    """

    observations: np.ndarray  # (b, T + 1, n_agents, obs_width)
    states: np.ndarray  # (b, T + 1, state_width)
    avail_actions: np.ndarray  # (b, T + 1, n_agents, n_actions)
    actions: np.ndarray  # (b, T, n_agents)
    rewards: np.ndarray  # (b, T)
    terminated: np.ndarray  # (b, T)
    mask: np.ndarray  # (b, T)
    selection: np.ndarray  # (b, T, n_policies)

    @property
    def size(self) -> int:
        return self.actions.shape[0]

    @property
    def max_length(self) -> int:
        return self.actions.shape[1]

    @cached_property
    def agent_inputs(self) -> np.ndarray:
        """Network inputs at every step, shape (b, T + 1, n_agents, width).
        Computed once per batch and shared by every unroll over it."""
        b, t_plus_1, n_agents = self.observations.shape[:3]
        last = np.full((b, t_plus_1, n_agents), NO_ACTION, dtype=np.int64)
        last[:, 1:] = self.actions
        return encode_inputs(
            self.observations, last, self.avail_actions.shape[-1]
        )

    @classmethod
    def from_episodes(cls, episodes: list[EpisodeRecord]):
        if not episodes:
            raise ValueError("Cannot batch an empty list of episodes")

        b = len(episodes)
        t = max(e.length for e in episodes)
        first = episodes[0]

        def padded(name, rows, fill=0.0, dtype=np.float32):
            shape = (b, rows) + getattr(first, name).shape[1:]
            out = np.full(shape, fill, dtype=dtype)
            for i, e in enumerate(episodes):
                value = getattr(e, name)
                out[i, : len(value)] = value
            return out

        mask = np.zeros((b, t), dtype=np.float32)
        for i, e in enumerate(episodes):
            mask[i, : e.length] = 1.0

        return cls(
            observations=padded("observations", t + 1),
            states=padded("states", t + 1),
            avail_actions=padded("avail_actions", t + 1, 1, np.int8),
            actions=padded("actions", t, 0, np.int64),
            rewards=padded("rewards", t),
            terminated=padded("terminated", t),
            mask=mask,
            selection=padded("selection", t, 0, np.int8),
        )


@dataclass
class ReplayBuffer:
    """A FIFO store of the most recent episodes."""

    capacity: int = 5000
    episodes: deque = field(init=False)
    n_inserted: int = field(init=False, default=0)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be positive: {self.capacity}")
        self.episodes = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self.episodes)

    def push_episode(self, episode: EpisodeRecord):
        """Append an episode, evicting the oldest one at capacity."""
        episode.validate()
        self.episodes.append(episode)
        self.n_inserted += 1

    def can_sample(self, batch_size: int) -> bool:
        return len(self.episodes) >= batch_size

    def sample_batch(
        self, batch_size: int, rng: np.random.Generator
    ) -> EpisodeBatch:
        """Draw episodes uniformly without replacement.

        Raises:
            ReplayNotReadyError: If fewer than batch_size episodes are stored.
        """
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive: {batch_size}")
        if not self.can_sample(batch_size):
            raise ReplayNotReadyError(
                f"Replay holds {len(self.episodes)} episodes, "
                f"{batch_size} needed"
            )

        index = rng.choice(len(self.episodes), size=batch_size, replace=False)
        return EpisodeBatch.from_episodes([self.episodes[i] for i in index])


def push_episode(buffer: ReplayBuffer, episode: EpisodeRecord):
    buffer.push_episode(episode)


def sample_batch(
    buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator
) -> EpisodeBatch:
    return buffer.sample_batch(batch_size, rng)
