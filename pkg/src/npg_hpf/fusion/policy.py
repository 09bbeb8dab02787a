from enum import Enum

import numpy as np
from structlog import get_logger

from npg_hpf.agents import UtilityNetwork, encode_inputs, input_width
from npg_hpf.autodiff import (
    Adam,
    Graph,
    Module,
    RMSprop,
    Tensor,
    clip_grad_norm,
)
from npg_hpf.autodiff.optim import Optimizer
from npg_hpf.envs import EnvSpec
from npg_hpf.mixers import Mixer, MixerKind, make_mixer
from npg_hpf.replay import EpisodeBatch

log = get_logger(__package__)


class LearnerKind(str, Enum):
    """The value-decomposition methods a learner can implement."""

    VDN = "vdn"
    QMIX = "qmix"
    WQMIX = "wqmix"
    QPLEX = "qplex"

    def __str__(self):
        return self.value

    @property
    def is_surrogate_target(self) -> bool:
        """True for methods that pair a restricted head with a separate
        estimate of the joint action value."""
        return self in (LearnerKind.WQMIX, LearnerKind.QPLEX)


RESTRICTED_HEADS = {
    LearnerKind.VDN: MixerKind.VDN,
    LearnerKind.QMIX: MixerKind.QMIX,
    LearnerKind.WQMIX: MixerKind.QMIX,
    LearnerKind.QPLEX: MixerKind.DUPLEX_DUELING,
}


class VDNetworks(Module):
    """The trainable networks of one learner: the shared utility network, a
    restricted head and, for WQMIX, an unrestricted central head."""

    def __init__(
        self,
        kind: LearnerKind,
        spec: EnvSpec,
        rng: np.random.Generator,
        hidden_width: int = 64,
        mixing_embed: int = 32,
        central_hidden: int = 64,
    ):
        kind = LearnerKind(kind)
        width = input_width(spec.obs_width, spec.n_actions, spec.n_agents)

        self.agent = UtilityNetwork(
            width, spec.n_actions, rng, hidden_width=hidden_width
        )
        self.restricted = make_mixer(
            RESTRICTED_HEADS[kind],
            spec.n_agents,
            spec.n_actions,
            spec.state_width,
            rng,
            mixing_embed=mixing_embed,
        )
        self.central = None
        if kind == LearnerKind.WQMIX:
            self.central = make_mixer(
                MixerKind.CENTRAL,
                spec.n_agents,
                spec.n_actions,
                spec.state_width,
                rng,
                central_hidden=central_hidden,
            )

    @property
    def joint(self) -> Mixer:
        """The head estimating the joint action value. For VDN, QMIX and
        QPLEX this is the restricted head itself."""
        return self.restricted if self.central is None else self.central


def unroll(graph: Graph, networks: VDNetworks, batch: EpisodeBatch) -> list:
    """Run the utility network over every step of a batch.

    Returns:
        One tensor of shape (b, n_agents, n_actions) per step, T + 1 in all.
    """
    b, t_plus_1, n_agents = batch.observations.shape[:3]
    n_actions = batch.avail_actions.shape[-1]
    inputs = batch.agent_inputs

    hidden = graph.constant(networks.agent.initial_hidden(b * n_agents))
    steps = []
    for t in range(t_plus_1):
        x = inputs[:, t].reshape(b * n_agents, -1)
        q, hidden = networks.agent(graph, x, hidden)
        steps.append(graph.reshape(q, (b, n_agents, n_actions)))
    return steps


def stack_steps(graph: Graph, steps: list) -> Tensor:
    """Stack per-step tensors of shape (b, ...) into (b, T, ...)."""
    return graph.concat(
        [graph.reshape(s, (s.shape[0], 1) + s.shape[1:]) for s in steps],
        axis=1,
    )


class VDPolicy:
    """A value-decomposition learner: online networks, a target copy
    synchronised on request, and an optimiser over the online parameters.

    Args:
        kind: The decomposition method.
        spec: The environment dimensions.
        rng: Source of initial parameter values.
        name: A label used in logs and checkpoint parameter names.
        optimizer: 'rmsprop' or 'adam'.
        lr: The learning rate.
        rmsprop_alpha: RMSprop smoothing constant.
        optim_eps: Optimiser epsilon.
        grad_norm_clip: Maximum joint gradient norm, 0 to disable.
        hidden_width, mixing_embed, central_hidden: Network widths.
    """

    def __init__(
        self,
        kind: LearnerKind | str,
        spec: EnvSpec,
        rng: np.random.Generator,
        name: str = "policy",
        optimizer: str = "rmsprop",
        lr: float = 5e-4,
        rmsprop_alpha: float = 0.99,
        optim_eps: float = 1e-5,
        grad_norm_clip: float = 10.0,
        hidden_width: int = 64,
        mixing_embed: int = 32,
        central_hidden: int = 64,
    ):
        self.kind = LearnerKind(kind)
        self.spec = spec
        self.name = name
        self.grad_norm_clip = grad_norm_clip

        widths = {
            "hidden_width": hidden_width,
            "mixing_embed": mixing_embed,
            "central_hidden": central_hidden,
        }
        self.online = VDNetworks(self.kind, spec, rng, **widths)
        self.target = VDNetworks(self.kind, spec, rng, **widths)
        self.sync_targets()

        self.optimizer: Optimizer
        match optimizer:
            case "rmsprop":
                self.optimizer = RMSprop(
                    self.parameters(), lr=lr, alpha=rmsprop_alpha, eps=optim_eps
                )
            case "adam":
                self.optimizer = Adam(self.parameters(), lr=lr)
            case _:
                raise ValueError(f"Unknown optimizer '{optimizer}'")

    def __str__(self):
        return f"<{self.name}: {self.kind}>"

    def parameters(self) -> list:
        return self.online.parameters()

    def sync_targets(self):
        self.target.load_state_dict(self.online.state_dict())
        log.debug("Target networks synchronised", policy=self.name)

    def initial_hidden(self) -> np.ndarray:
        return self.online.agent.initial_hidden(self.spec.n_agents)

    def utilities(
        self,
        observations: np.ndarray,
        last_actions: np.ndarray,
        hidden: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the online utilities for one step of acting.

        Returns:
            Utilities of shape (n_agents, n_actions) and the next hidden
            states. Nothing is recorded for differentiation.
        """
        graph = Graph(record=False)
        inputs = encode_inputs(observations, last_actions, self.spec.n_actions)
        q, h = self.online.agent(graph, inputs, hidden)
        return q.data, h.data

    def joint_value(
        self,
        q_values: np.ndarray,
        actions: np.ndarray,
        state: np.ndarray,
        restricted: bool = False,
    ) -> float:
        """Evaluate one joint action with the online joint (or restricted)
        head, without recording."""
        head = self.online.restricted if restricted else self.online.joint
        value = head.evaluate(
            Graph(record=False),
            np.asarray(q_values)[None],
            np.asarray(actions)[None],
            np.asarray(state)[None],
        )
        return float(value.data[0])

    def step_optimizer(self) -> float:
        """Clip gradients, apply them and clear them. Returns the gradient
        norm before clipping."""
        norm = clip_grad_norm(self.parameters(), self.grad_norm_clip)
        self.optimizer.step()
        self.optimizer.zero_grad()
        return norm

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            f"{self.name}.{k}": v for k, v in self.online.state_dict().items()
        }

    def load_state_dict(self, state: dict[str, np.ndarray]):
        """Load online parameters saved by `state_dict` and synchronise the
        target copy."""
        prefix = f"{self.name}."
        own = {
            k[len(prefix) :]: v for k, v in state.items() if k.startswith(prefix)
        }
        self.online.load_state_dict(own)
        self.sync_targets()
