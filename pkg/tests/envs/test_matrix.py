import numpy as np
import pytest
from pytest import mark as m

from npg_hpf.envs import (
    PAYOFF,
    EpisodeOverError,
    InvalidActionError,
    MatrixGame,
    make_env,
    matrix_game_step,
)


@m.describe("Matrix game")
class TestMatrixGame:
    @m.context("When each joint action is played")
    @m.it("Pays the fixed table")
    def test_payoff(self):
        expected = {
            (0, 0): 8,
            (0, 1): -12,
            (0, 2): -12,
            (1, 0): -12,
            (1, 1): 3,
            (1, 2): 0,
            (2, 0): -12,
            (2, 1): 0,
            (2, 2): 3,
        }
        for joint, reward in expected.items():
            result = matrix_game_step(joint)
            assert result.reward == reward
            assert result.terminated
            assert not result.truncated_by_limit

    @m.context("When the payoff table is averaged")
    @m.it("Gives -34/9")
    def test_mean(self):
        assert PAYOFF.mean() == pytest.approx(-34 / 9)

    @m.context("When an episode starts")
    @m.it("Observes all-ones vectors and a constant state")
    def test_reset(self):
        game = MatrixGame()
        observations, state = game.reset(seed=3)
        assert observations.shape == (2, game.spec.obs_width)
        assert state.shape == (game.spec.state_width,)
        assert np.all(observations == 1)
        assert np.all(state == 1)
        assert game.spec.n_actions == 3
        assert game.spec.episode_limit == 1

    @m.context("When an action is out of range")
    @m.it("Raises an InvalidActionError")
    def test_invalid_action(self):
        with pytest.raises(InvalidActionError, match=r"in \[0, 3\)"):
            matrix_game_step((0, 3))
        with pytest.raises(InvalidActionError, match="Expected 2 actions"):
            matrix_game_step((0,))

    @m.context("When the game is stepped twice")
    @m.it("Raises an EpisodeOverError")
    def test_one_step(self):
        game = MatrixGame()
        game.reset()
        game.step((1, 1))
        with pytest.raises(EpisodeOverError):
            game.step((1, 1))

    @m.context("When environments are made by name")
    @m.it("Builds the registered environments")
    def test_make_env(self):
        assert isinstance(make_env("matrix"), MatrixGame)
        assert make_env("pp").spec.n_agents == 8
        assert make_env("pp-small").spec.n_agents == 4
        with pytest.raises(ValueError, match="Unknown environment 'smac'"):
            make_env("smac")
