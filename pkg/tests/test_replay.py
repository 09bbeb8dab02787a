import numpy as np
import pytest
from pytest import mark as m

from npg_hpf.autodiff import Graph
from npg_hpf.replay import (
    EpisodeBatch,
    EpisodeRecord,
    MalformedEpisodeError,
    ReplayBuffer,
    ReplayNotReadyError,
    push_episode,
    sample_batch,
)


def episode(length: int, tag: float = 0.0, n_agents=2, n_actions=3):
    """An episode whose rewards are all `tag`, terminated at its last step."""
    terminated = np.zeros(length, dtype=bool)
    terminated[-1] = True
    return EpisodeRecord(
        observations=np.full((length + 1, n_agents, 2), tag, dtype=np.float32),
        states=np.full((length + 1, 4), tag, dtype=np.float32),
        avail_actions=np.ones((length + 1, n_agents, n_actions), dtype=np.int8),
        actions=np.zeros((length, n_agents), dtype=np.int64),
        rewards=np.full(length, tag, dtype=np.float32),
        terminated=terminated,
        selection=np.tile([1, 0], (length, 1)).astype(np.int8),
    )


def tag_of(e: EpisodeRecord) -> float:
    return float(e.rewards[0])


@m.describe("Replay buffer")
class TestReplayBuffer:
    @m.context("When pushed beyond capacity")
    @m.it("Evicts the oldest episodes first")
    def test_fifo(self):
        buffer = ReplayBuffer(capacity=2)
        for tag in (1.0, 2.0, 3.0):
            push_episode(buffer, episode(2, tag))
        assert len(buffer) == 2
        assert [tag_of(e) for e in buffer.episodes] == [2.0, 3.0]
        assert buffer.n_inserted == 3

    @m.context("When pushed below capacity")
    @m.it("Grows by one and stores the episode unchanged")
    def test_push(self):
        buffer = ReplayBuffer(capacity=10)
        e = episode(3, 5.0)
        push_episode(buffer, e)
        assert len(buffer) == 1
        stored = buffer.episodes[0]
        for name in ("observations", "states", "actions", "rewards"):
            assert getattr(stored, name).tobytes() == getattr(e, name).tobytes()

    @m.context("When an episode is malformed")
    @m.it("Raises a MalformedEpisodeError")
    def test_malformed(self):
        buffer = ReplayBuffer()
        e = episode(3)
        e.rewards = e.rewards[:2]
        with pytest.raises(MalformedEpisodeError, match="rewards"):
            push_episode(buffer, e)

        e = episode(3)
        e.terminated[0] = True
        with pytest.raises(MalformedEpisodeError, match="end exactly once"):
            push_episode(buffer, e)

        e = episode(3)
        e.selection[1] = [1, 1]
        with pytest.raises(MalformedEpisodeError, match="exactly one policy"):
            push_episode(buffer, e)

        e = episode(3)
        e.actions[0, 0] = 3
        with pytest.raises(MalformedEpisodeError, match="out of range"):
            push_episode(buffer, e)
        assert len(buffer) == 0

    @m.context("When fewer episodes than the batch size are stored")
    @m.it("Signals that it is not ready")
    def test_not_ready(self):
        buffer = ReplayBuffer()
        push_episode(buffer, episode(2))
        assert not buffer.can_sample(2)
        with pytest.raises(ReplayNotReadyError):
            sample_batch(buffer, 2, np.random.default_rng(0))

    @m.context("When the batch size equals the buffer size")
    @m.it("Returns a permutation of the buffer")
    def test_permutation(self):
        buffer = ReplayBuffer(capacity=5)
        for tag in range(5):
            push_episode(buffer, episode(1, float(tag)))
        batch = sample_batch(buffer, 5, np.random.default_rng(0))
        assert sorted(batch.rewards[:, 0]) == [0, 1, 2, 3, 4]

    @m.context("When sampling 10000 batches from 10 episodes")
    @m.it("Draws every episode uniformly")
    def test_uniform(self):
        buffer = ReplayBuffer()
        for tag in range(10):
            push_episode(buffer, episode(1, float(tag)))
        rng = np.random.default_rng(1)
        draws = [
            int(sample_batch(buffer, 1, rng).rewards[0, 0])
            for _ in range(10000)
        ]
        counts = np.bincount(draws, minlength=10)
        sigma = np.sqrt(10000 * 0.1 * 0.9)
        assert np.all(np.abs(counts - 1000) < 3 * sigma)

    @m.context("When sampled twice from the same generator state")
    @m.it("Returns the same batch")
    def test_deterministic(self):
        buffer = ReplayBuffer()
        for tag in range(8):
            push_episode(buffer, episode(tag + 1, float(tag)))
        a = sample_batch(buffer, 4, np.random.default_rng(3))
        b = sample_batch(buffer, 4, np.random.default_rng(3))
        np.testing.assert_array_equal(a.rewards, b.rewards)
        np.testing.assert_array_equal(a.mask, b.mask)


@m.describe("Episode batches")
class TestEpisodeBatch:
    @m.context("When episodes of different lengths are batched")
    @m.it("Pads to the longest and masks the padding")
    def test_padding(self):
        batch = EpisodeBatch.from_episodes([episode(1, 1.0), episode(3, 2.0)])
        assert batch.size == 2
        assert batch.max_length == 3
        assert batch.observations.shape == (2, 4, 2, 2)
        np.testing.assert_array_equal(batch.mask, [[1, 0, 0], [1, 1, 1]])
        np.testing.assert_array_equal(batch.rewards[0], [1, 0, 0])
        np.testing.assert_array_equal(batch.terminated[0], [1, 0, 0])
        assert np.all(batch.avail_actions[0, 2:] == 1)
        assert batch.selection.shape == (2, 3, 2)

    @m.context("When a masked mean is taken")
    @m.it("Ignores the amount of padding")
    def test_masked_mean(self):
        short = [episode(2, 1.0), episode(2, 3.0)]
        padded = EpisodeBatch.from_episodes(short + [episode(6, 0.0)])
        padded.mask[2] = 0
        plain = EpisodeBatch.from_episodes(short)

        graph = Graph()
        a = graph.masked_mean(graph.constant(padded.rewards), padded.mask)
        b = graph.masked_mean(graph.constant(plain.rewards), plain.mask)
        assert a.item() == pytest.approx(b.item())
        assert a.item() == pytest.approx(2.0)

    @m.context("When agent inputs are requested")
    @m.it("Encodes every step once, with no last action at the start")
    def test_agent_inputs(self):
        batch = EpisodeBatch.from_episodes([episode(1, 1.0), episode(3, 2.0)])
        inputs = batch.agent_inputs

        # observation 2 + last action 3 + agent id 2
        assert inputs.shape == (2, 4, 2, 7)
        assert batch.agent_inputs is inputs
        np.testing.assert_array_equal(inputs[:, 0, :, 2:5], 0)
        np.testing.assert_array_equal(inputs[1, 1:, :, 2], 1)
        np.testing.assert_array_equal(inputs[0, 1, 0], [1, 1, 1, 0, 0, 1, 0])

    @m.context("When there are no episodes")
    @m.it("Raises a ValueError")
    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            EpisodeBatch.from_episodes([])
