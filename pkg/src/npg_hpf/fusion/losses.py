from dataclasses import dataclass

import numpy as np

from npg_hpf.agents import greedy_actions
from npg_hpf.autodiff import Graph, Tensor
from npg_hpf.fusion.policy import LearnerKind, VDPolicy, stack_steps, unroll
from npg_hpf.fusion.sampling import PolicySet
from npg_hpf.mixers import wqmix_weight
from npg_hpf.replay import EpisodeBatch

"""Training losses.

A fused pair is trained on one objective,

    L = L_td_tot + L_td_jt + L_instructive

where L_td_tot is the TD loss of the constrained (beta) learner's restricted
head, L_td_jt the TD loss of the surrogate-target (alpha) learner's joint
estimate plus that of its restricted head, and L_instructive the mean KL
divergence from alpha's per-agent softmax policies to beta's. A single
learner is trained on its own TD term alone.

Targets are double-Q style: the next joint action is the per-agent argmax of
the online utilities and is valued by the target networks. Targets never
carry gradients.
"""

Learners = VDPolicy | PolicySet


def policies_of(learners: Learners) -> tuple[VDPolicy, ...]:
    if isinstance(learners, PolicySet):
        return learners.policies
    return (learners,)


@dataclass(frozen=True)
class LossOptions:
    gamma: float = 0.99
    wqmix_alpha: float = 0.1
    wqmix_weighted: bool = True
    instructive: bool = True
    instructive_both_sides: bool = False


@dataclass(frozen=True)
class LossBreakdown:
    """The total loss and its terms. Terms that a configuration does not
    use are None."""

    total: Tensor
    td_tot: float | None = None
    td_jt: float | None = None
    instructive: float | None = None

    def values(self) -> dict[str, float | None]:
        return {
            "loss_total": self.total.item(),
            "loss_td_tot": self.td_tot,
            "loss_td_jt": self.td_jt,
            "loss_instructive": self.instructive,
        }


@dataclass(frozen=True)
class Utilities:
    """A learner's online utilities over a batch."""

    taken: Tensor  # (b, T, n_agents, n_actions), differentiable
    values: np.ndarray  # (b, T + 1, n_agents, n_actions)


def online_utilities(graph: Graph, policy: VDPolicy, batch: EpisodeBatch):
    steps = unroll(graph, policy.online, batch)
    return Utilities(
        taken=stack_steps(graph, steps[:-1]),
        values=np.stack([s.data for s in steps], axis=1),
    )


def td_targets(
    batch: EpisodeBatch,
    policy: VDPolicy,
    gamma: float,
    next_utilities: np.ndarray = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bootstrapped targets for a learner's restricted and joint heads.

        y = r + gamma * (1 - terminated) * Q_target(s', u'*)

    where u'* is the per-agent argmax of the online utilities at the next
    step, restricted to available actions. Steps cut by the episode limit
    are not terminal and still bootstrap.

    Args:
        batch: The sampled episodes.
        policy: The learner.
        gamma: The discount factor.
        next_utilities: The online utilities at steps 1..T, shape
            (b, T, n_agents, n_actions). Computed if not given.

    Returns:
        Targets for the restricted and the joint head, each of shape (b, T).
    """
    graph = Graph(record=False)
    if next_utilities is None:
        steps = unroll(graph, policy.online, batch)
        next_utilities = np.stack([s.data for s in steps[1:]], axis=1)

    target_q = np.stack(
        [s.data for s in unroll(graph, policy.target, batch)[1:]], axis=1
    )
    next_actions = greedy_actions(next_utilities, batch.avail_actions[:, 1:])
    next_states = batch.states[:, 1:]

    bootstrap = gamma * (1.0 - batch.terminated)
    q_tot = policy.target.restricted.evaluate(
        graph, target_q, next_actions, next_states
    ).data
    y_tot = batch.rewards + bootstrap * q_tot
    if policy.target.central is None:
        return y_tot, y_tot

    q_jt = policy.target.central.evaluate(
        graph, target_q, next_actions, next_states
    ).data
    return y_tot, batch.rewards + bootstrap * q_jt


def instructive_loss(
    graph: Graph,
    utilities_alpha,
    utilities_beta,
    mask: np.ndarray,
    both_sides: bool = False,
) -> Tensor:
    """Mean over valid (episode, step, agent) entries of
    KL(softmax(Q_alpha) || softmax(Q_beta)).

    Args:
        graph: The graph to evaluate on.
        utilities_alpha: Shape (b, T, n_agents, n_actions).
        utilities_beta: The same shape.
        mask: Valid steps, shape (b, T).
        both_sides: If False, no gradient reaches the alpha utilities.
    """
    if not both_sides:
        utilities_alpha = graph.stop_gradient(utilities_alpha)

    log_p = graph.log_softmax(utilities_alpha)
    log_q = graph.log_softmax(utilities_beta)
    kl = graph.sum(
        graph.multiply(graph.exp(log_p), graph.subtract(log_p, log_q)),
        axis=-1,
    )
    agent_mask = np.broadcast_to(np.asarray(mask)[..., None], kl.shape)
    return graph.masked_mean(kl, agent_mask)


def constrained_td_loss(
    graph: Graph,
    policy: VDPolicy,
    batch: EpisodeBatch,
    utilities: Utilities,
    y_tot: np.ndarray,
) -> Tensor:
    """The masked mean squared TD error of the restricted head."""
    q_tot = policy.online.restricted.evaluate(
        graph, utilities.taken, batch.actions, batch.states[:, :-1]
    )
    return graph.masked_mean(graph.squared_error(q_tot, y_tot), batch.mask)


def surrogate_td_loss(
    graph: Graph,
    policy: VDPolicy,
    batch: EpisodeBatch,
    utilities: Utilities,
    y_jt: np.ndarray,
    options: LossOptions,
) -> Tensor:
    """The TD loss of a surrogate-target learner.

    For QPLEX the duplex dueling head is both the restricted and the joint
    head and its squared error is counted once. For WQMIX the central head's
    squared error is weighted by `wqmix_weight` (unless disabled), which
    compares the online restricted and central estimates of each sample, and
    the restricted head's unweighted error against the same targets is added.
    """
    states = batch.states[:, :-1]
    q_tot = policy.online.restricted.evaluate(
        graph, utilities.taken, batch.actions, states
    )
    restricted = graph.masked_mean(
        graph.squared_error(q_tot, y_jt), batch.mask
    )
    if policy.kind == LearnerKind.QPLEX:
        return restricted

    q_jt = policy.online.central.evaluate(
        graph, utilities.taken, batch.actions, states
    )
    errors = graph.squared_error(q_jt, y_jt)
    if options.wqmix_weighted:
        greedy = greedy_actions(
            utilities.values[:, :-1], batch.avail_actions[:, :-1]
        )
        is_argmax = np.all(batch.actions == greedy, axis=-1)
        weights = wqmix_weight(
            is_argmax, q_tot.data, q_jt.data, options.wqmix_alpha
        )
        errors = graph.multiply(errors, weights)

    return graph.add(graph.masked_mean(errors, batch.mask), restricted)


def total_loss(
    graph: Graph,
    batch: EpisodeBatch,
    learners: Learners,
    options: LossOptions = LossOptions(),
) -> LossBreakdown:
    """Build the training objective on a recording graph."""
    if isinstance(learners, VDPolicy):
        utilities = online_utilities(graph, learners, batch)
        y_tot, y_jt = td_targets(
            batch, learners, options.gamma, utilities.values[:, 1:]
        )
        if learners.kind.is_surrogate_target:
            td = surrogate_td_loss(
                graph, learners, batch, utilities, y_jt, options
            )
            return LossBreakdown(td, td_jt=td.item())

        td = constrained_td_loss(graph, learners, batch, utilities, y_tot)
        return LossBreakdown(td, td_tot=td.item())

    alpha, beta = learners.policies
    u_alpha = online_utilities(graph, alpha, batch)
    u_beta = online_utilities(graph, beta, batch)
    _, y_jt = td_targets(batch, alpha, options.gamma, u_alpha.values[:, 1:])
    y_tot, _ = td_targets(batch, beta, options.gamma, u_beta.values[:, 1:])

    td_jt = surrogate_td_loss(graph, alpha, batch, u_alpha, y_jt, options)
    td_tot = constrained_td_loss(graph, beta, batch, u_beta, y_tot)
    total = graph.add(td_tot, td_jt)

    instructive = None
    if options.instructive:
        kl = instructive_loss(
            graph,
            u_alpha.taken,
            u_beta.taken,
            batch.mask,
            both_sides=options.instructive_both_sides,
        )
        total = graph.add(total, kl)
        instructive = kl.item()

    return LossBreakdown(total, td_tot.item(), td_jt.item(), instructive)
