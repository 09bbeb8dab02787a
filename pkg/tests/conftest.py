import itertools
import os

import numpy as np
import pytest

from npg_hpf.config import RunConfig
from npg_hpf.envs import MatrixGame
from npg_hpf.fusion import VDPolicy
from npg_hpf.replay import EpisodeBatch, EpisodeRecord

"Set to run the long acceptance trainings."
SLOW_TESTS_VAR = "NPG_HPF_SLOW_TESTS"


def pytest_collection_modifyitems(config, items):
    if os.environ.get(SLOW_TESTS_VAR):
        return
    skip = pytest.mark.skip(reason=f"{SLOW_TESTS_VAR} is not set")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(name="matrix_spec")
def get_matrix_spec():
    return MatrixGame().spec


@pytest.fixture(name="policy_factory")
def get_policy_factory(matrix_spec):
    """Returns a function creating small learners for the matrix game."""

    def make(kind, name="policy", seed=0, spec=None, **kwargs):
        widths = {"hidden_width": 8, "mixing_embed": 4, "central_hidden": 8}
        widths.update(kwargs)
        return VDPolicy(
            kind,
            spec or matrix_spec,
            np.random.default_rng(seed),
            name=name,
            **widths,
        )

    return make


@pytest.fixture(name="matrix_episodes")
def get_matrix_episodes():
    """One single-step episode per joint action of the matrix game, in
    row-major order."""
    game = MatrixGame()
    episodes = []
    for u1, u2 in itertools.product(range(3), repeat=2):
        observations, state = game.reset()
        result = game.step([u1, u2])
        episodes.append(
            EpisodeRecord(
                observations=np.stack(
                    [observations, result.next_observations]
                ),
                states=np.stack([state, result.next_state]),
                avail_actions=np.ones((2, 2, 3), dtype=np.int8),
                actions=np.array([[u1, u2]]),
                rewards=np.array([result.reward], dtype=np.float32),
                terminated=np.array([True]),
                selection=np.array([[1]], dtype=np.int8),
            )
        )
    return episodes


@pytest.fixture(name="matrix_batch")
def get_matrix_batch(matrix_episodes):
    return EpisodeBatch.from_episodes(matrix_episodes)


@pytest.fixture(name="quick_config")
def get_quick_config():
    """A matrix game run small enough for unit tests."""
    return RunConfig(
        algo="hpf-wq",
        env="matrix",
        seed=3,
        max_steps=60,
        batch_size=4,
        buffer_size=50,
        target_update_episodes=10,
        eval_interval_steps=20,
        eval_episodes=4,
        hidden_width=8,
        mixing_embed=4,
        central_hidden=8,
    )
