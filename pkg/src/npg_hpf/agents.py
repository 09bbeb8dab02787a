from dataclasses import dataclass
from enum import Enum

import numpy as np

from npg_hpf.autodiff import GRUCell, Graph, Linear, Module, Tensor

"""Per-agent recurrent utility networks, the inputs they are fed and
epsilon-greedy action selection.

All agents share one network. An agent's input is its observation, a one-hot
of the action it took at the previous step (all zero at the start of an
episode) and a one-hot of its agent id:

    [ observation | last action one-hot | agent id one-hot ]
"""

"Marks 'no previous action' in an array of last actions."
NO_ACTION = -1


def one_hot(index: np.ndarray, width: int) -> np.ndarray:
    """One-hot encode integer indices; NO_ACTION encodes as all zeros."""
    index = np.asarray(index)
    return (index[..., None] == np.arange(width)).astype(np.float32)


def encode_inputs(
    observations: np.ndarray, last_actions: np.ndarray, n_actions: int
) -> np.ndarray:
    """Build network inputs for any number of leading axes.

    Args:
        observations: Shape (..., n_agents, obs_width).
        last_actions: Integer actions, shape (..., n_agents), NO_ACTION at the
            first step of an episode.
        n_actions: The size of the action space.

    Returns:
        Shape (..., n_agents, obs_width + n_actions + n_agents).
    """
    observations = np.asarray(observations, dtype=np.float32)
    n_agents = observations.shape[-2]
    if np.shape(last_actions) != observations.shape[:-1]:
        raise ValueError(
            f"Last actions of shape {np.shape(last_actions)} do not match "
            f"observations of shape {observations.shape}"
        )
    ids = np.broadcast_to(
        np.eye(n_agents, dtype=np.float32),
        observations.shape[:-2] + (n_agents, n_agents),
    )
    return np.concatenate(
        [observations, one_hot(last_actions, n_actions), ids], axis=-1
    )


def input_width(obs_width: int, n_actions: int, n_agents: int) -> int:
    return obs_width + n_actions + n_agents


@dataclass(frozen=True)
class AgentInput:
    """The inputs of all agents at one step of an episode."""

    observations: np.ndarray
    last_actions: np.ndarray

    @classmethod
    def first(cls, observations: np.ndarray):
        """The inputs at the start of an episode, before any action."""
        n_agents = np.shape(observations)[0]
        return cls(observations, np.full(n_agents, NO_ACTION, dtype=np.int64))

    def encode(self, n_actions: int) -> np.ndarray:
        return encode_inputs(self.observations, self.last_actions, n_actions)


class UtilityNetwork(Module):
    """A DRQN-style utility network: an affine encoder with ReLU, a GRU cell
    and an affine head with one output per action.

    Args:
        in_width: The input width, see `input_width`.
        n_actions: The number of actions.
        rng: Source of the initial parameter values.
        hidden_width: The encoder and GRU width.
    """

    def __init__(
        self,
        in_width: int,
        n_actions: int,
        rng: np.random.Generator,
        hidden_width: int = 64,
    ):
        if in_width < 1 or n_actions < 1 or hidden_width < 1:
            raise ValueError(
                f"Invalid network widths: input {in_width}, actions "
                f"{n_actions}, hidden {hidden_width}"
            )
        self.fc1 = Linear(in_width, hidden_width, rng)
        self.rnn = GRUCell(hidden_width, hidden_width, rng)
        self.fc2 = Linear(hidden_width, n_actions, rng)

    @property
    def in_width(self) -> int:
        return self.fc1.in_width

    @property
    def hidden_width(self) -> int:
        return self.rnn.hidden_width

    @property
    def n_actions(self) -> int:
        return self.fc2.out_width

    def initial_hidden(self, n: int) -> np.ndarray:
        return np.zeros((n, self.hidden_width), dtype=np.float32)

    def __call__(
        self, graph: Graph, inputs: Tensor, hidden: Tensor
    ) -> tuple[Tensor, Tensor]:
        return utility_forward(graph, self, inputs, hidden)


def utility_forward(
    graph: Graph, network: UtilityNetwork, inputs, hidden
) -> tuple[Tensor, Tensor]:
    """One recurrent step for a batch of agents.

    Args:
        graph: The graph to evaluate on.
        network: The shared utility network.
        inputs: Encoded inputs, shape (N, in_width).
        hidden: Hidden states, shape (N, hidden_width).

    Returns:
        Utilities of shape (N, n_actions) and the next hidden states.
    """
    if not isinstance(inputs, Tensor):
        inputs = graph.constant(inputs)
    if not isinstance(hidden, Tensor):
        hidden = graph.constant(hidden)

    x = graph.relu(network.fc1(graph, inputs))
    h = network.rnn(graph, x, hidden)
    return network.fc2(graph, h), h


def select_actions(
    q_values: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    avail: np.ndarray = None,
) -> np.ndarray:
    """Epsilon-greedy actions for a set of agents.

    Each agent independently takes a uniformly random available action with
    probability epsilon and otherwise the available action of highest
    utility, with ties broken towards the lowest index.

    Args:
        q_values: Utilities, shape (n_agents, n_actions).
        epsilon: Exploration probability in [0, 1].
        rng: The random source.
        avail: Optional availability mask of the same shape, 1 for available.

    Returns:
        Integer actions, shape (n_agents,).
    """
    q_values = np.asarray(q_values, dtype=np.float64)
    if q_values.ndim != 2 or q_values.shape[-1] == 0:
        raise ValueError(
            f"Utilities must be a non-empty (agents, actions) array: "
            f"{q_values.shape}"
        )
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1]: {epsilon}")

    avail = (
        np.ones(q_values.shape, dtype=bool)
        if avail is None
        else np.asarray(avail).astype(bool)
    )
    if not avail.any(axis=-1).all():
        raise ValueError("Every agent must have at least one available action")

    greedy = np.argmax(np.where(avail, q_values, -np.inf), axis=-1)
    explore = rng.random(len(q_values)) < epsilon
    uniform = np.argmax(
        np.where(avail, rng.random(q_values.shape), -1.0), axis=-1
    )
    return np.where(explore, uniform, greedy).astype(np.int64)


def select_action(
    q_values: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy selection for a single agent."""
    q_values = np.asarray(q_values)
    if q_values.size == 0:
        raise ValueError("Cannot select an action from empty utilities")
    return int(select_actions(q_values.reshape(1, -1), epsilon, rng)[0])


def greedy_actions(q_values: np.ndarray, avail: np.ndarray = None) -> np.ndarray:
    """Per-agent argmax over the last axis, restricted to available actions."""
    q_values = np.asarray(q_values)
    if avail is not None:
        q_values = np.where(np.asarray(avail).astype(bool), q_values, -np.inf)
    return np.argmax(q_values, axis=-1).astype(np.int64)


class EpsilonMode(str, Enum):
    LINEAR_ANNEAL = "linear_anneal"
    CONSTANT = "constant"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EpsilonSchedule:
    """Exploration rate as a function of environment steps.

    In linear_anneal mode epsilon falls linearly from start to end over
    anneal_steps and stays at end thereafter. In constant mode it is always
    start.
    """

    start: float = 1.0
    end: float = 0.05
    anneal_steps: int = 50000
    mode: EpsilonMode = EpsilonMode.LINEAR_ANNEAL

    def __post_init__(self):
        object.__setattr__(self, "mode", EpsilonMode(self.mode))
        if not 0 <= self.end <= self.start <= 1:
            raise ValueError(
                f"Epsilon must satisfy 0 <= end <= start <= 1: "
                f"start {self.start}, end {self.end}"
            )
        if self.anneal_steps < 1:
            raise ValueError(
                f"anneal_steps must be positive: {self.anneal_steps}"
            )

    def epsilon_at(self, step: int) -> float:
        if step < 0:
            raise ValueError(f"step must be non-negative: {step}")
        if self.mode == EpsilonMode.CONSTANT:
            return self.start

        fraction = min(step / self.anneal_steps, 1.0)
        return self.start + fraction * (self.end - self.start)
