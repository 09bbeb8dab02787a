from abc import ABC, abstractmethod
from enum import Enum

import numpy as np

from npg_hpf.agents import one_hot
from npg_hpf.autodiff import Graph, Linear, Module, Tensor

"""Value-decomposition heads.

A head maps the utilities of the actions the agents chose, together with the
global state, to a joint action value. Every head evaluates batches with any
number of leading axes through `Mixer.evaluate`:

    q_vectors  (..., n_agents, n_actions)   per-agent utilities
    actions    (..., n_agents)               chosen actions
    states     (..., state_width)            global states
    ->         (...)                         joint values

Restricted heads (VDN, QMIX and the duplex dueling head) satisfy the
Individual-Global-Max principle: the joint action maximising their output is
the tuple of per-agent utility maxima. The unrestricted head does not.
"""


class MixerKind(str, Enum):
    VDN = "vdn"
    QMIX = "qmix"
    CENTRAL = "central"
    DUPLEX_DUELING = "duplex_dueling"

    def __str__(self):
        return self.value


class Mixer(Module, ABC):
    """The common interface of all heads."""

    @abstractmethod
    def mix(
        self,
        graph: Graph,
        chosen: Tensor,
        states: Tensor,
        q_vectors: Tensor,
        actions: np.ndarray,
    ) -> Tensor:
        """Mix a flat batch.

        Args:
            graph: The graph to evaluate on.
            chosen: Utilities of the chosen actions, shape (N, n_agents).
            states: Shape (N, state_width).
            q_vectors: All utilities, shape (N, n_agents, n_actions).
            actions: The chosen actions, shape (N, n_agents).

        Returns:
            Joint values, shape (N,).
        """
        raise NotImplementedError

    def evaluate(
        self, graph: Graph, q_vectors, actions: np.ndarray, states
    ) -> Tensor:
        """Joint values of the given actions, see the module documentation."""
        if not isinstance(q_vectors, Tensor):
            q_vectors = graph.constant(q_vectors)
        actions = np.asarray(actions, dtype=np.int64)
        states = np.asarray(
            states.data if isinstance(states, Tensor) else states
        )

        lead = q_vectors.shape[:-2]
        n_agents, n_actions = q_vectors.shape[-2:]
        if actions.shape != lead + (n_agents,):
            raise ValueError(
                f"Actions of shape {actions.shape} do not match utilities "
                f"of shape {q_vectors.shape}"
            )
        if states.shape[:-1] != lead:
            raise ValueError(
                f"States of shape {states.shape} do not match utilities "
                f"of shape {q_vectors.shape}"
            )

        n = int(np.prod(lead, dtype=np.int64))
        flat_actions = actions.reshape(n, n_agents)
        flat_q = graph.reshape(q_vectors, (n, n_agents, n_actions))
        chosen = graph.reshape(
            graph.gather(flat_q, flat_actions[..., None], axis=-1),
            (n, n_agents),
        )
        flat_states = graph.constant(states.reshape(n, -1))

        joint = self.mix(graph, chosen, flat_states, flat_q, flat_actions)
        return graph.reshape(joint, lead)


def vdn_mix(graph: Graph, chosen: Tensor) -> Tensor:
    """The sum of the chosen utilities."""
    return graph.sum(chosen, axis=-1)


class VDNMixer(Mixer):
    """Additive decomposition. It has no parameters."""

    def mix(self, graph, chosen, states, q_vectors, actions) -> Tensor:
        return vdn_mix(graph, chosen)


class QMixer(Mixer):
    """Monotonic mixing with state-conditioned hypernetworks.

        w1 = |s W_w1 + b_w1|           (n_agents x embed)
        h  = elu(Q w1 + (s W_b1 + b_b1))
        w2 = |s W_w2 + b_w2|           (embed x 1)
        y  = h w2 + V(s)

    where V is a two-layer state network. The absolute values make the output
    non-decreasing in every agent utility.
    """

    def __init__(
        self,
        n_agents: int,
        state_width: int,
        rng: np.random.Generator,
        embed: int = 32,
    ):
        self.n_agents = n_agents
        self.embed = embed
        self.hyper_w1 = Linear(state_width, n_agents * embed, rng)
        self.hyper_b1 = Linear(state_width, embed, rng)
        self.hyper_w2 = Linear(state_width, embed, rng)
        self.v1 = Linear(state_width, embed, rng)
        self.v2 = Linear(embed, 1, rng)

    def mixing_weights(self, graph: Graph, states: Tensor):
        """The non-negative first and second layer weights for a batch of
        states, shapes (N, n_agents, embed) and (N, embed, 1)."""
        n = states.shape[0]
        w1 = graph.abs(self.hyper_w1(graph, states))
        w2 = graph.abs(self.hyper_w2(graph, states))
        return (
            graph.reshape(w1, (n, self.n_agents, self.embed)),
            graph.reshape(w2, (n, self.embed, 1)),
        )

    def mix(self, graph, chosen, states, q_vectors, actions) -> Tensor:
        return qmix_mix(graph, self, chosen, states)


def qmix_mix(graph: Graph, mixer: QMixer, chosen: Tensor, states) -> Tensor:
    """Mix chosen utilities of shape (N, n_agents) with a QMIX head."""
    if not isinstance(states, Tensor):
        states = graph.constant(states)
    n = chosen.shape[0]
    w1, w2 = mixer.mixing_weights(graph, states)
    b1 = graph.reshape(mixer.hyper_b1(graph, states), (n, 1, mixer.embed))

    q = graph.reshape(chosen, (n, 1, mixer.n_agents))
    hidden = graph.elu(graph.add(graph.matmul(q, w1), b1))
    v = mixer.v2(graph, graph.relu(mixer.v1(graph, states)))

    y = graph.add(graph.matmul(hidden, w2), graph.reshape(v, (n, 1, 1)))
    return graph.reshape(y, (n,))


class CentralMixer(Mixer):
    """An unconstrained feed-forward estimate of the joint action value.

    Its input is the chosen utilities, the state and a one-hot of each
    agent's chosen action, so joint actions whose utilities happen to tie
    remain distinguishable.
    """

    def __init__(
        self,
        n_agents: int,
        n_actions: int,
        state_width: int,
        rng: np.random.Generator,
        hidden: int = 64,
    ):
        self.n_actions = n_actions
        in_width = n_agents + state_width + n_agents * n_actions
        self.fc1 = Linear(in_width, hidden, rng)
        self.fc2 = Linear(hidden, hidden, rng)
        self.fc3 = Linear(hidden, 1, rng)

    def mix(self, graph, chosen, states, q_vectors, actions) -> Tensor:
        n = chosen.shape[0]
        codes = one_hot(actions, self.n_actions).reshape(n, -1)
        x = graph.concat([chosen, states, graph.constant(codes)], axis=-1)
        x = graph.relu(self.fc1(graph, x))
        x = graph.relu(self.fc2(graph, x))
        return graph.reshape(self.fc3(graph, x), (n,))


class DuplexDuelingMixer(Mixer):
    """A duplex dueling head.

        V_i = max_u Q_i(u)
        A_i = Q_i(u_i) - V_i                       (<= 0, 0 at the argmax)
        Q_tot = sum_i |w_i(s)| V_i + b(s) + sum_i lambda_i(s) A_i
        lambda_i(s) = 1 + (1 - f) elu(s W + b)     (>= f > 0)

    Each state-conditioned map is a single affine layer. The floor f keeps
    the coefficients positive where elu saturates at -1 in float32.
    """

    LAMBDA_FLOOR = 1e-6

    def __init__(
        self,
        n_agents: int,
        state_width: int,
        rng: np.random.Generator,
    ):
        self.hyper_w = Linear(state_width, n_agents, rng)
        self.hyper_b = Linear(state_width, 1, rng)
        self.hyper_lambda = Linear(state_width, n_agents, rng)

    def coefficients(self, graph: Graph, states: Tensor) -> Tensor:
        """The advantage coefficients lambda_i(s), shape (N, n_agents)."""
        saturating = graph.elu(self.hyper_lambda(graph, states))
        return graph.add(graph.scale(saturating, 1 - self.LAMBDA_FLOOR), 1.0)

    def mix(self, graph, chosen, states, q_vectors, actions) -> Tensor:
        return qplex_mix(graph, self, chosen, states, q_vectors)


def qplex_mix(
    graph: Graph,
    mixer: DuplexDuelingMixer,
    chosen: Tensor,
    states,
    q_vectors: Tensor,
) -> Tensor:
    if not isinstance(states, Tensor):
        states = graph.constant(states)
    values = graph.max(q_vectors, axis=-1)
    advantages = graph.subtract(chosen, values)

    weights = graph.abs(mixer.hyper_w(graph, states))
    v_tot = graph.add(
        graph.sum(graph.multiply(weights, values), axis=-1, keepdims=True),
        mixer.hyper_b(graph, states),
    )
    a_tot = graph.sum(
        graph.multiply(mixer.coefficients(graph, states), advantages),
        axis=-1,
        keepdims=True,
    )
    y = graph.add(v_tot, a_tot)
    return graph.reshape(y, (y.shape[0],))


def make_mixer(
    kind: MixerKind | str,
    n_agents: int,
    n_actions: int,
    state_width: int,
    rng: np.random.Generator,
    mixing_embed: int = 32,
    central_hidden: int = 64,
) -> Mixer:
    match MixerKind(kind):
        case MixerKind.VDN:
            return VDNMixer()
        case MixerKind.QMIX:
            return QMixer(n_agents, state_width, rng, embed=mixing_embed)
        case MixerKind.CENTRAL:
            return CentralMixer(
                n_agents, n_actions, state_width, rng, hidden=central_hidden
            )
        case MixerKind.DUPLEX_DUELING:
            return DuplexDuelingMixer(n_agents, state_width, rng)


def wqmix_weight(is_argmax, q_tot, q_jt, alpha: float) -> np.ndarray:
    """The optimistic weighting of joint TD errors.

    Returns 1 where the joint action is the greedy one or where the restricted
    estimate q_tot lies below q_jt, and alpha elsewhere. Accepts scalars or
    arrays of a common shape.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1]: {alpha}")
    full = np.logical_or(
        np.asarray(is_argmax, dtype=bool), np.asarray(q_tot) < np.asarray(q_jt)
    )
    return np.where(full, 1.0, alpha)
