from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from npg_hpf.autodiff.tensor import DTYPE, Graph, ShapeError, Tensor

"""Parameters, modules and the layers the networks of this package are built
from."""


class Parameter(Tensor):
    """A named leaf tensor that requires a gradient."""

    def __init__(self, data, name: str = None):
        super().__init__(data, requires_grad=True, name=name)


def uniform_init(
    rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]
) -> np.ndarray:
    """Draw initial values uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Module:
    """A container of parameters and sub-modules.

    Parameters are discovered from the instance attributes in definition
    order, so the order of `named_parameters` is deterministic. Parameter
    names are dotted attribute paths, e.g. 'gru.w_ir'.
    """

    def named_parameters(
        self, prefix: str = ""
    ) -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}.{attr}" if prefix else attr
            if isinstance(value, Parameter):
                value.name = name
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]):
        """Copy parameter values from a mapping of names to arrays.

        The names and shapes must match those of this module exactly.
        """
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            raise ValueError(
                f"Parameter names do not match: missing {missing}, "
                f"unexpected {unexpected}"
            )
        for name, p in own.items():
            value = np.asarray(state[name], dtype=DTYPE)
            if value.shape != p.shape:
                raise ShapeError(
                    f"load_state_dict: parameter {name} has shape {p.shape}, "
                    f"got {value.shape}"
                )
            p.data = value.copy()


class Linear(Module):
    """An affine map x @ weight + bias."""

    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator):
        self.weight = Parameter(uniform_init(rng, in_width, (in_width, out_width)))
        self.bias = Parameter(uniform_init(rng, in_width, (out_width,)))

    @property
    def in_width(self) -> int:
        return self.weight.shape[0]

    @property
    def out_width(self) -> int:
        return self.weight.shape[1]

    def __call__(self, graph: Graph, x: Tensor) -> Tensor:
        return graph.add(graph.matmul(x, self.weight), self.bias)


@dataclass
class GRUParams:
    """The weights of a GRU cell. Input weights are (input, hidden), recurrent
    weights are (hidden, hidden)."""

    w_ir: Tensor
    w_iz: Tensor
    w_in: Tensor
    w_hr: Tensor
    w_hz: Tensor
    w_hn: Tensor
    b_r: Tensor
    b_z: Tensor
    b_in: Tensor
    b_hn: Tensor


def gru_cell(graph: Graph, x: Tensor, h: Tensor, params: GRUParams) -> Tensor:
    """One step of a gated recurrent unit.

        r  = sigmoid(x W_ir + h W_hr + b_r)
        z  = sigmoid(x W_iz + h W_hz + b_z)
        n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
        h' = (1 - z) * h + z * n

    Args:
        graph: The graph to evaluate on.
        x: Input batch, shape (N, input width).
        h: Hidden batch, shape (N, hidden width).
        params: The cell weights.

    Returns:
        The next hidden batch, shape (N, hidden width).
    """
    if x.shape[-1] != params.w_ir.shape[0]:
        raise ShapeError(
            f"gru_cell: input width {x.shape[-1]} does not match input "
            f"weights {params.w_ir.shape}"
        )
    if h.shape[-1] != params.w_hr.shape[0]:
        raise ShapeError(
            f"gru_cell: hidden width {h.shape[-1]} does not match recurrent "
            f"weights {params.w_hr.shape}"
        )

    def gate(w_i, w_h, b):
        return graph.sigmoid(
            graph.add(
                graph.add(graph.matmul(x, w_i), graph.matmul(h, w_h)), b
            )
        )

    r = gate(params.w_ir, params.w_hr, params.b_r)
    z = gate(params.w_iz, params.w_hz, params.b_z)
    recurrent = graph.add(graph.matmul(h, params.w_hn), params.b_hn)
    n = graph.tanh(
        graph.add(
            graph.add(graph.matmul(x, params.w_in), params.b_in),
            graph.multiply(r, recurrent),
        )
    )
    return graph.add(h, graph.multiply(z, graph.subtract(n, h)))


class GRUCell(Module):
    def __init__(self, in_width: int, hidden_width: int, rng: np.random.Generator):
        def w(rows):
            return Parameter(uniform_init(rng, hidden_width, (rows, hidden_width)))

        def b():
            return Parameter(uniform_init(rng, hidden_width, (hidden_width,)))

        self.w_ir, self.w_iz, self.w_in = w(in_width), w(in_width), w(in_width)
        self.w_hr = w(hidden_width)
        self.w_hz = w(hidden_width)
        self.w_hn = w(hidden_width)
        self.b_r, self.b_z, self.b_in, self.b_hn = b(), b(), b(), b()

    @property
    def hidden_width(self) -> int:
        return self.w_hr.shape[0]

    def params(self) -> GRUParams:
        return GRUParams(
            self.w_ir,
            self.w_iz,
            self.w_in,
            self.w_hr,
            self.w_hz,
            self.w_hn,
            self.b_r,
            self.b_z,
            self.b_in,
            self.b_hn,
        )

    def __call__(self, graph: Graph, x: Tensor, h: Tensor) -> Tensor:
        return gru_cell(graph, x, h, self.params())
