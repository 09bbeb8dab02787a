import numpy as np
import pytest
from pytest import mark as m

from npg_hpf.agents import (
    NO_ACTION,
    AgentInput,
    EpsilonSchedule,
    UtilityNetwork,
    encode_inputs,
    greedy_actions,
    input_width,
    select_action,
    select_actions,
)
from npg_hpf.autodiff import Graph

N_AGENTS, N_ACTIONS, OBS_WIDTH = 3, 4, 5


def network(seed=0, hidden_width=8) -> UtilityNetwork:
    width = input_width(OBS_WIDTH, N_ACTIONS, N_AGENTS)
    return UtilityNetwork(
        width, N_ACTIONS, np.random.default_rng(seed), hidden_width=hidden_width
    )


@m.describe("Agent inputs")
class TestAgentInput:
    @m.context("When an episode starts")
    @m.it("Encodes no last action and the agent id")
    def test_first(self):
        observations = np.full((N_AGENTS, OBS_WIDTH), 0.5)
        inputs = AgentInput.first(observations).encode(N_ACTIONS)

        assert inputs.shape == (N_AGENTS, OBS_WIDTH + N_ACTIONS + N_AGENTS)
        np.testing.assert_array_equal(inputs[:, :OBS_WIDTH], observations)
        assert np.all(inputs[:, OBS_WIDTH : OBS_WIDTH + N_ACTIONS] == 0)
        np.testing.assert_array_equal(
            inputs[:, OBS_WIDTH + N_ACTIONS :], np.eye(N_AGENTS)
        )

    @m.context("When last actions are given over leading axes")
    @m.it("One-hot encodes them")
    def test_leading_axes(self):
        observations = np.zeros((2, 6, N_AGENTS, OBS_WIDTH))
        last = np.full((2, 6, N_AGENTS), NO_ACTION)
        last[1, 2] = [3, 0, 1]
        inputs = encode_inputs(observations, last, N_ACTIONS)

        actions = inputs[..., OBS_WIDTH : OBS_WIDTH + N_ACTIONS]
        np.testing.assert_array_equal(actions[1, 2].argmax(axis=-1), [3, 0, 1])
        assert actions.sum() == N_AGENTS

    @m.context("When last actions do not match the observations")
    @m.it("Raises a ValueError")
    def test_mismatch(self):
        with pytest.raises(ValueError, match="do not match"):
            encode_inputs(np.zeros((3, 5)), np.zeros(2, dtype=int), 4)


@m.describe("Utility network")
class TestUtilityNetwork:
    @m.context("When all parameters are zero")
    @m.it("Returns zero utilities")
    def test_zero(self):
        net = network()
        for p in net.parameters():
            p.data[...] = 0
        inputs = AgentInput.first(np.ones((N_AGENTS, OBS_WIDTH)))
        q, h = net(
            Graph(), inputs.encode(N_ACTIONS), net.initial_hidden(N_AGENTS)
        )
        assert q.shape == (N_AGENTS, N_ACTIONS)
        assert np.all(q.data == 0)

    @m.context("When agents see identical inputs")
    @m.it("Differ only through the id channel")
    def test_id_channel(self):
        net = network()
        inputs = AgentInput.first(np.ones((N_AGENTS, OBS_WIDTH))).encode(
            N_ACTIONS
        )
        hidden = net.initial_hidden(N_AGENTS)

        q, _ = net(Graph(record=False), inputs, hidden)
        assert not np.allclose(q.data[0], q.data[1])

        net.fc1.weight.data[OBS_WIDTH + N_ACTIONS :] = 0
        q, _ = net(Graph(record=False), inputs, hidden)
        np.testing.assert_array_equal(q.data[0], q.data[1])
        np.testing.assert_array_equal(q.data[1], q.data[2])

    @m.context("When agents are processed in one batch or one at a time")
    @m.it("Gives the same utilities and hidden states")
    def test_batching(self):
        net = network(hidden_width=16)
        rng = np.random.default_rng(1)
        inputs = rng.normal(size=(N_AGENTS, net.in_width)).astype(np.float32)
        hidden = rng.normal(size=(N_AGENTS, 16)).astype(np.float32)

        q, h = net(Graph(record=False), inputs, hidden)
        for i in range(N_AGENTS):
            qi, hi = net(Graph(record=False), inputs[i : i + 1], hidden[i : i + 1])
            np.testing.assert_allclose(qi.data[0], q.data[i], atol=1e-6)
            np.testing.assert_allclose(hi.data[0], h.data[i], atol=1e-6)

    @m.context("When the number of agents in a batch changes")
    @m.it("Uses the same shared parameters")
    def test_shared(self):
        net = network()
        n = net.n_parameters()
        for batch in (1, 7):
            q, _ = net(
                Graph(record=False),
                np.zeros((batch, net.in_width)),
                net.initial_hidden(batch),
            )
            assert q.shape == (batch, N_ACTIONS)
        assert net.n_parameters() == n

    @m.context("When a step is replayed from the same prefix")
    @m.it("Reproduces the hidden state")
    def test_hidden_deterministic(self):
        net = network()
        rng = np.random.default_rng(2)
        steps = rng.normal(size=(4, N_AGENTS, net.in_width))

        def run():
            h = net.initial_hidden(N_AGENTS)
            for x in steps:
                _, h = net(Graph(record=False), x, h)
                h = h.data
            return h

        np.testing.assert_array_equal(run(), run())


@m.describe("Epsilon-greedy selection")
class TestSelection:
    @m.context("When epsilon is 0")
    @m.it("Takes the argmax, breaking ties towards the lowest index")
    def test_greedy(self):
        rng = np.random.default_rng(0)
        assert select_action([1, 5, 2], 0.0, rng) == 1
        assert select_action([4, 4, 1], 0.0, rng) == 0

    @m.context("When epsilon is 1")
    @m.it("Draws actions uniformly")
    def test_uniform(self):
        rng = np.random.default_rng(0)
        q = np.array([[10.0, 0.0, 0.0]])
        counts = np.bincount(
            [select_actions(q, 1.0, rng)[0] for _ in range(30000)],
            minlength=3,
        )
        sigma = np.sqrt(30000 * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - 10000) < 3 * sigma)

    @m.context("When a constant is added to the utilities")
    @m.it("Selects the same greedy actions")
    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        q = rng.normal(size=(5, 6))
        np.testing.assert_array_equal(
            select_actions(q, 0.0, rng), select_actions(q + 123.0, 0.0, rng)
        )

    @m.context("When some actions are unavailable")
    @m.it("Never selects them")
    def test_avail(self):
        rng = np.random.default_rng(0)
        q = np.array([[9.0, 1.0, 2.0], [0.0, 0.0, 5.0]])
        avail = np.array([[0, 1, 1], [1, 1, 0]])
        np.testing.assert_array_equal(greedy_actions(q, avail), [2, 0])
        for _ in range(200):
            actions = select_actions(q, 1.0, rng, avail)
            assert avail[[0, 1], actions].all()

    @m.context("When the arguments are invalid")
    @m.it("Raises a ValueError")
    def test_invalid(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="empty"):
            select_action([], 0.0, rng)
        with pytest.raises(ValueError, match="epsilon"):
            select_action([1, 2], 1.5, rng)
        with pytest.raises(ValueError, match="available action"):
            select_actions([[1.0, 2.0]], 0.0, rng, avail=[[0, 0]])


@m.describe("Epsilon schedule")
class TestEpsilonSchedule:
    @m.context("When annealing linearly")
    @m.it("Interpolates from start to end and then holds")
    def test_linear(self):
        schedule = EpsilonSchedule()
        assert schedule.epsilon_at(0) == 1.0
        assert schedule.epsilon_at(25000) == pytest.approx(0.525)
        assert schedule.epsilon_at(50000) == pytest.approx(0.05)
        assert schedule.epsilon_at(10**7) == pytest.approx(0.05)
        values = [schedule.epsilon_at(t) for t in range(0, 60000, 997)]
        assert all(0.05 - 1e-12 <= v <= 1.0 for v in values)

    @m.context("When constant")
    @m.it("Always returns the start value")
    def test_constant(self):
        schedule = EpsilonSchedule(start=1.0, mode="constant")
        assert {schedule.epsilon_at(t) for t in (0, 1, 10**6)} == {1.0}

    @m.context("When the schedule is invalid")
    @m.it("Raises a ValueError")
    def test_invalid(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(start=0.1, end=0.5)
        with pytest.raises(ValueError):
            EpsilonSchedule(mode="cosine")
        with pytest.raises(ValueError, match="step"):
            EpsilonSchedule().epsilon_at(-1)
