import numpy as np
import pytest
from pytest import mark as m

from npg_hpf.autodiff import GRUCell, Graph, ShapeError, Tensor, gru_cell
from npg_hpf.autodiff.gradcheck import gradcheck

TOLERANCE = 1e-3


def leaves(rng, *shapes) -> list[Tensor]:
    return [
        Tensor(rng.uniform(-2, 2, size=s), requires_grad=True) for s in shapes
    ]


def three_layer_network(rng):
    x, w1, b1, w2, b2, w3, y = leaves(
        rng, (4, 5), (5, 6), (6,), (6, 6), (6,), (6, 2), (4, 2)
    )

    def build(graph: Graph):
        h = graph.tanh(graph.add(graph.matmul(x, w1), b1))
        h = graph.elu(graph.add(graph.matmul(h, w2), b2))
        out = graph.sigmoid(graph.matmul(h, w3))
        return graph.mean(graph.squared_error(out, y))

    return build, [x, w1, b1, w2, b2, w3]


def softmax_divergence(rng):
    p, q = leaves(rng, (3, 4), (3, 4))

    def build(graph: Graph):
        log_p = graph.log_softmax(p)
        log_q = graph.log_softmax(q)
        kl = graph.multiply(graph.exp(log_p), graph.subtract(log_p, log_q))
        return graph.mean(graph.sum(kl, axis=-1))

    return build, [p, q]


def gather_and_max(rng):
    (q,) = leaves(rng, (5, 3, 4))
    index = rng.integers(4, size=(5, 3, 1))

    def build(graph: Graph):
        chosen = graph.gather(q, index, axis=-1)
        best = graph.max(q, axis=-1, keepdims=True)
        return graph.sum(graph.multiply(chosen, best))

    return build, [q]


def positive_transforms(rng):
    a, b = leaves(rng, (3, 3), (3, 3))

    def build(graph: Graph):
        positive = graph.add(graph.abs(a), 1.0)
        s = graph.softmax(graph.multiply(graph.log(positive), b), axis=0)
        return graph.sum(graph.multiply(s, graph.relu(b)))

    return build, [a, b]


def concat_reshape(rng):
    a, b, w = leaves(rng, (2, 3), (2, 5), (4, 4))

    def build(graph: Graph):
        joined = graph.reshape(graph.concat([a, b], axis=1), (4, 4))
        return graph.mean(graph.matmul(joined, w), axis=None)

    return build, [a, b, w]


def gru_unroll(rng):
    """Five recurrent steps of a GRU over a sequence of inputs."""
    cell = GRUCell(3, 4, rng)
    xs = leaves(rng, *[(2, 3)] * 5)
    (h0,) = leaves(rng, (2, 4))

    def build(graph: Graph):
        h = h0
        for x in xs:
            h = cell(graph, x, h)
        return graph.sum(graph.multiply(h, h))

    return build, [*cell.parameters(), xs[0], h0]


FAMILIES = [
    three_layer_network,
    softmax_divergence,
    gather_and_max,
    positive_transforms,
    concat_reshape,
    gru_unroll,
]


@m.describe("Gradient checking")
class TestGradcheck:
    @m.context("When a five step GRU unroll is checked")
    @m.it("Matches central differences")
    def test_gru_unroll(self):
        build, checked = gru_unroll(np.random.default_rng(0))
        assert gradcheck(build, checked) < TOLERANCE

    @m.context("When 50 random composed graphs are checked")
    @m.it("Matches central differences on every graph")
    def test_random_graphs(self):
        worst = 0.0
        for seed in range(50):
            family = FAMILIES[seed % len(FAMILIES)]
            build, checked = family(np.random.default_rng(seed))
            worst = max(worst, gradcheck(build, checked))
        assert worst < TOLERANCE

    @m.context("When a backward rule is wrong")
    @m.it("Reports a large error")
    def test_detects_error(self):
        (x,) = leaves(np.random.default_rng(1), (3,))

        def build(graph: Graph):
            return graph.sum(graph.multiply(x, x))

        def wrong(graph: Graph):
            # Recorded as x * stop_gradient(x), so the analytic gradient is
            # x where the values imply 2x
            if graph.record:
                return graph.sum(graph.multiply(x, graph.stop_gradient(x)))
            return build(graph)

        assert gradcheck(build, [x]) < TOLERANCE
        assert gradcheck(wrong, [x]) > 0.1

    @m.context("When the gradient check has run")
    @m.it("Restores the leaf values")
    def test_restores_leaves(self):
        build, checked = softmax_divergence(np.random.default_rng(2))
        before = [t.data.copy() for t in checked]
        gradcheck(build, checked)
        for t, data in zip(checked, before):
            assert t.data.dtype == np.float32
            np.testing.assert_array_equal(t.data, data)


@m.describe("GRU cell")
class TestGRUCell:
    @m.context("When all parameters are zero")
    @m.it("Halves the hidden state")
    def test_zero_params(self):
        rng = np.random.default_rng(0)
        cell = GRUCell(2, 2, rng)
        for p in cell.parameters():
            p.data[...] = 0
        h = gru_cell(
            Graph(),
            Tensor([[3.0, -1.0]]),
            Tensor([[1.0, 0.0]]),
            cell.params(),
        )
        np.testing.assert_allclose(h.data, [[0.5, 0.0]], atol=1e-7)

    @m.context("When the update gate saturates")
    @m.it("Returns the candidate state")
    def test_saturated_update(self):
        rng = np.random.default_rng(0)
        cell = GRUCell(2, 2, rng)
        cell.b_z.data[...] = 50.0
        x = Tensor(np.zeros((1, 2)))
        h = Tensor([[0.3, -0.7]])

        out = gru_cell(Graph(), x, h, cell.params())

        r = 1 / (1 + np.exp(-(h.data @ cell.w_hr.data + cell.b_r.data)))
        candidate = np.tanh(
            cell.b_in.data + r * (h.data @ cell.w_hn.data + cell.b_hn.data)
        )
        np.testing.assert_allclose(out.data, candidate, atol=1e-6)

    @m.context("When the input width does not match the weights")
    @m.it("Raises a ShapeError")
    def test_width_mismatch(self):
        cell = GRUCell(3, 4, np.random.default_rng(0))
        with pytest.raises(ShapeError, match="input width 2"):
            cell(Graph(), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 4))))
