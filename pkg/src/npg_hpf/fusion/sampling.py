from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from npg_hpf.agents import greedy_actions
from npg_hpf.fusion.policy import LearnerKind, VDPolicy

"""Choosing which policy of a fused pair acts.

At every step of a training rollout both policies propose an epsilon-greedy
joint action. Each policy's value is estimated from its current utilities, a
categorical distribution over the policies is formed from those values and
one policy is drawn; its joint action is executed.
"""


class Estimator(str, Enum):
    """How a policy's value is estimated for sampling.

    ADDITIVE sums each agent's maximum utility. OPTIMISTIC evaluates the
    policy's joint head at the tuple of per-agent greedy actions.
    """

    ADDITIVE = "additive"
    OPTIMISTIC = "optimistic"

    def __str__(self):
        return self.value


class Sampler(str, Enum):
    """BOLTZMANN draws policies in proportion to exp(value / temperature).
    RANDOM draws them uniformly."""

    BOLTZMANN = "boltzmann"
    RANDOM = "random"

    def __str__(self):
        return self.value


ALPHA, BETA = 0, 1


def estimate_policy_value(
    policy: VDPolicy,
    q_values: np.ndarray,
    state: np.ndarray,
    mode: Estimator | str,
    avail: np.ndarray = None,
) -> float:
    """Estimate a policy's value at the current step.

    Args:
        policy: The policy whose joint head is used in optimistic mode.
        q_values: That policy's utilities, shape (n_agents, n_actions).
        state: The global state.
        mode: 'additive' or 'optimistic'.
        avail: Optional availability mask for the greedy actions.
    """
    try:
        mode = Estimator(mode)
    except ValueError as e:
        raise ValueError(f"Unknown estimator '{mode}'") from e

    greedy = greedy_actions(q_values, avail)
    if mode == Estimator.ADDITIVE:
        chosen = np.take_along_axis(q_values, greedy[:, None], axis=-1)
        return float(np.sum(chosen))

    return policy.joint_value(q_values, greedy, state)


def selection_probabilities(
    values: Sequence[float],
    temperature: float,
    sampler: Sampler | str = Sampler.BOLTZMANN,
) -> np.ndarray:
    """The categorical distribution over policies.

    Raises:
        ValueError: If a value is not finite or the temperature is not
            positive.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"Policy values must be finite: {values}")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive: {temperature}")

    if Sampler(sampler) == Sampler.RANDOM:
        return np.full(len(values), 1.0 / len(values))

    logits = values / temperature
    e = np.exp(logits - np.max(logits))
    return e / np.sum(e)


def sample_policy(
    value_alpha: float,
    value_beta: float,
    temperature: float,
    sampler: Sampler | str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the acting policy.

    Returns:
        A one-hot integer vector over (alpha, beta).
    """
    p = selection_probabilities([value_alpha, value_beta], temperature, sampler)
    w = np.zeros(len(p), dtype=np.int64)
    w[rng.choice(len(p), p=p)] = 1
    return w


def check_one_hot(w: np.ndarray, width: int):
    w = np.asarray(w)
    if (
        w.shape != (width,)
        or not np.isin(w, (0, 1)).all()
        or int(np.sum(w)) != 1
    ):
        raise ValueError(f"Expected a one-hot vector of width {width}: {w}")


def composite_act(
    joint_actions: Sequence[np.ndarray], w: np.ndarray
) -> np.ndarray:
    """Return the joint action of the policy selected by w."""
    check_one_hot(w, len(joint_actions))
    return np.asarray(joint_actions[int(np.argmax(w))])


@dataclass
class SelectionRecord:
    """Counts of policy selections."""

    n_policies: int = 2
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_policies < 1:
            raise ValueError(f"n_policies must be positive: {self.n_policies}")
        self.counts = np.zeros(self.n_policies, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def record(self, w: np.ndarray):
        check_one_hot(w, self.n_policies)
        self.counts += np.asarray(w, dtype=np.int64)

    def frequencies(self) -> np.ndarray:
        """Selection frequencies per policy.

        Raises:
            ValueError: If nothing has been recorded.
        """
        if self.total == 0:
            raise ValueError("No selections have been recorded")
        return self.counts / self.total

    def reset(self):
        self.counts[:] = 0


@dataclass
class PolicySet:
    """A surrogate-target learner (alpha) fused with a constrained learner
    (beta)."""

    alpha: VDPolicy
    beta: VDPolicy
    estimator: Estimator = Estimator.OPTIMISTIC
    sampler: Sampler = Sampler.BOLTZMANN
    temperature: float = 1.0

    def __post_init__(self):
        self.estimator = Estimator(self.estimator)
        self.sampler = Sampler(self.sampler)

        if not self.alpha.kind.is_surrogate_target:
            raise ValueError(
                f"The alpha policy must be WQMIX or QPLEX: {self.alpha.kind}"
            )
        if self.beta.kind not in (LearnerKind.VDN, LearnerKind.QMIX):
            raise ValueError(
                f"The beta policy must be VDN or QMIX: {self.beta.kind}"
            )
        if not self.temperature > 0:
            raise ValueError(
                f"temperature must be positive: {self.temperature}"
            )

        alpha_ids = {id(p) for p in self.alpha.parameters()}
        alpha_ids.update(id(p) for p in self.alpha.target.parameters())
        beta_ids = {id(p) for p in self.beta.parameters()}
        beta_ids.update(id(p) for p in self.beta.target.parameters())
        if alpha_ids & beta_ids:
            raise ValueError("The alpha and beta policies share parameters")

    @property
    def policies(self) -> tuple[VDPolicy, VDPolicy]:
        return self.alpha, self.beta

    def choose(
        self,
        q_values: Sequence[np.ndarray],
        state: np.ndarray,
        rng: np.random.Generator,
        avail: np.ndarray = None,
    ) -> np.ndarray:
        """Estimate both policies' values and draw the acting policy."""
        values = [
            estimate_policy_value(p, q, state, self.estimator, avail)
            for p, q in zip(self.policies, q_values)
        ]
        return sample_policy(*values, self.temperature, self.sampler, rng)
