from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from structlog import get_logger

from npg_hpf.agents import NO_ACTION, select_actions
from npg_hpf.envs import Environment
from npg_hpf.fusion.losses import Learners
from npg_hpf.fusion.policy import VDPolicy
from npg_hpf.fusion.sampling import (
    ALPHA,
    BETA,
    PolicySet,
    SelectionRecord,
    composite_act,
)
from npg_hpf.replay import EpisodeRecord

log = get_logger(__package__)

"""Rollouts.

A controller turns observations into joint actions. A single learner acts
epsilon-greedily on its own utilities. A fused pair lets both policies
propose epsilon-greedy joint actions and executes the proposal of the policy
drawn by its sampler, or of a fixed policy at test time. Both policies'
recurrent states always see the joint action that was executed.
"""

"Upper bound (exclusive) for per-episode environment seeds."
SEED_BOUND = 2**31


class Controller(ABC):
    n_policies: int = 1

    @abstractmethod
    def begin_episode(self):
        """Reset recurrent state for a new episode."""
        raise NotImplementedError

    @abstractmethod
    def act(
        self,
        observations: np.ndarray,
        last_actions: np.ndarray,
        state: np.ndarray,
        avail: np.ndarray,
        epsilon: float,
        rng: np.random.Generator,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return the joint action to execute and the one-hot selection of
        the policy that proposed it."""
        raise NotImplementedError


class SingleController(Controller):
    def __init__(self, policy: VDPolicy):
        self.policy = policy
        self.hidden = policy.initial_hidden()

    def begin_episode(self):
        self.hidden = self.policy.initial_hidden()

    def act(self, observations, last_actions, state, avail, epsilon, rng):
        q, self.hidden = self.policy.utilities(
            observations, last_actions, self.hidden
        )
        actions = select_actions(q, epsilon, rng, avail)
        return actions, np.ones(1, dtype=np.int8)


class FusionController(Controller):
    """Acts with a fused pair.

    Args:
        policy_set: The pair.
        mode: 'composite' to sample the acting policy at every step, or
            'alpha' / 'beta' to always act with one policy.
        selection: If given, every selection is recorded here.
    """

    n_policies = 2
    FIXED = {"alpha": ALPHA, "beta": BETA}

    def __init__(
        self,
        policy_set: PolicySet,
        mode: str = "composite",
        selection: SelectionRecord = None,
    ):
        if mode != "composite" and mode not in self.FIXED:
            raise ValueError(f"Unknown acting mode '{mode}'")
        self.policy_set = policy_set
        self.mode = mode
        self.selection = selection
        self.hidden = [p.initial_hidden() for p in policy_set.policies]

    def begin_episode(self):
        self.hidden = [p.initial_hidden() for p in self.policy_set.policies]

    def act(self, observations, last_actions, state, avail, epsilon, rng):
        utilities = []
        for k, policy in enumerate(self.policy_set.policies):
            q, self.hidden[k] = policy.utilities(
                observations, last_actions, self.hidden[k]
            )
            utilities.append(q)
        proposals = [select_actions(q, epsilon, rng, avail) for q in utilities]

        if self.mode == "composite":
            w = self.policy_set.choose(utilities, state, rng, avail)
        else:
            w = np.zeros(self.n_policies, dtype=np.int8)
            w[self.FIXED[self.mode]] = 1

        if self.selection is not None:
            self.selection.record(w)
        return composite_act(proposals, w), w


def make_controller(
    learners: Learners, mode: str = "composite", selection=None
) -> Controller:
    if isinstance(learners, PolicySet):
        return FusionController(learners, mode, selection)
    return SingleController(learners)


def run_episode(
    env: Environment,
    controller: Controller,
    epsilon: float,
    rng: np.random.Generator,
    seed: int = None,
) -> EpisodeRecord:
    """Play one episode to its end.

    Args:
        env: The environment, reset with the given seed.
        controller: Chooses the joint actions.
        epsilon: The exploration rate for the whole episode.
        rng: The source of exploration and selection draws.
        seed: The environment seed; drawn from rng if not given.
    """
    if seed is None:
        seed = int(rng.integers(SEED_BOUND))
    observations, state = env.reset(seed=seed)
    controller.begin_episode()
    last_actions = np.full(env.spec.n_agents, NO_ACTION, dtype=np.int64)

    obs, states, avail, actions, rewards, terminated, selection = (
        [] for _ in range(7)
    )
    while True:
        available = env.avail_actions()
        joint, w = controller.act(
            observations, last_actions, state, available, epsilon, rng
        )
        result = env.step(joint)

        obs.append(observations)
        states.append(state)
        avail.append(available)
        actions.append(joint)
        rewards.append(result.reward)
        terminated.append(result.terminated)
        selection.append(w)

        observations, state = result.next_observations, result.next_state
        last_actions = joint
        if result.done:
            break

    obs.append(observations)
    states.append(state)
    avail.append(env.avail_actions())

    return EpisodeRecord(
        observations=np.stack(obs).astype(np.float32),
        states=np.stack(states).astype(np.float32),
        avail_actions=np.stack(avail).astype(np.int8),
        actions=np.stack(actions).astype(np.int64),
        rewards=np.asarray(rewards, dtype=np.float32),
        terminated=np.asarray(terminated, dtype=bool),
        selection=np.stack(selection).astype(np.int8),
        truncated=result.truncated_by_limit,
    )


@dataclass(frozen=True)
class ReturnStats:
    returns: np.ndarray

    @property
    def n(self) -> int:
        return len(self.returns)

    @property
    def median(self) -> float:
        return float(np.median(self.returns))

    @property
    def q25(self) -> float:
        return float(np.percentile(self.returns, 25))

    @property
    def q75(self) -> float:
        return float(np.percentile(self.returns, 75))

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    def __str__(self):
        return (
            f"median {self.median:.6f} q25 {self.q25:.6f} "
            f"q75 {self.q75:.6f} n {self.n}"
        )


def evaluate(
    controller: Controller,
    env: Environment,
    n_episodes: int,
    rng: np.random.Generator,
    epsilon: float = 0.0,
) -> ReturnStats:
    """Play test episodes. Nothing is stored for training."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be positive: {n_episodes}")

    returns = [
        run_episode(env, controller, epsilon, rng).episode_return
        for _ in range(n_episodes)
    ]
    stats = ReturnStats(np.asarray(returns, dtype=np.float64))
    log.debug("Test episodes played", epsilon=epsilon, returns=str(stats))
    return stats
