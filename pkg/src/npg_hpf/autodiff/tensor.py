#
# Copyright © 2026 Genome Research Ltd. All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

"""This module provides a small define-by-run reverse-mode automatic
differentiation engine over dense numpy arrays.

A Graph is a tape. Every operation evaluated through `Graph.forward` is
appended to the tape together with the arrays its backward rule needs, so the
order of the tape is a topological order. `Graph.backward` walks the tape in
reverse and writes gradients into the leaf tensors that require them.

A new Graph is built for every training step, e.g.

    graph = Graph()
    h = graph.relu(graph.add(graph.matmul(x, w), b))
    loss = graph.mean(graph.squared_error(h, y))
    graph.backward(loss)
    # w.grad and b.grad now hold dLoss/dw and dLoss/db

A Graph created with record=False evaluates values only; this is what rollouts
and target networks use.
"""

DTYPE = np.float32

"Lower clamp for arguments of log."
LOG_EPSILON = 1e-10


class ShapeError(ValueError):
    """An exception raised when the shapes of the inputs to an operation do
    not conform."""

    pass


class GraphError(RuntimeError):
    """An exception raised when a graph is used incorrectly, for example when
    backward is requested for a non-scalar loss."""

    pass


class Tensor:
    """A dense array of floats with an optional gradient slot.

    Tensors created directly are leaves. Tensors returned by a recording
    Graph are intermediate values of that graph; their gradients are held by
    the graph during backward and are never written to the tensor.
    """

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str = None,
        dtype=DTYPE,
    ):
        self.data = np.array(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._graph: "Graph | None" = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._graph is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(
                f"item: only a single-element tensor can be converted, "
                f"got shape {self.shape}"
            )
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        name = f" {self.name}" if self.name else ""
        return f"<Tensor{name} shape={self.shape} grad={self.requires_grad}>"


@dataclass(slots=True)
class Node:
    """One recorded operation: its tag, inputs, output, the arrays the inputs
    held at evaluation time and anything saved by the forward rule."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    arrays: tuple[np.ndarray, ...]
    attrs: dict = field(default_factory=dict)
    saved: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Op:
    forward: Callable
    backward: Callable | None


_OPS: dict[str, _Op] = {}


def _register(tag: str, forward: Callable, backward: Callable | None):
    _OPS[tag] = _Op(forward, backward)


def op_tags() -> list[str]:
    """Return the tags of all supported operations."""
    return sorted(_OPS)


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(
            f"{op}: cannot broadcast shapes {a.shape} and {b.shape}"
        ) from e


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes that were broadcast to produce it."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _expand_reduced(grad, shape, axis, keepdims) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(grad.reshape((1,) * len(shape)), shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


def _reduced_count(shape, axis) -> int:
    if axis is None:
        return int(np.prod(shape))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return int(np.prod([shape[a] for a in axes]))


# Forward rules take (saved, *arrays, **attrs) and return an array. Backward
# rules take (saved, grad, *arrays, **attrs) and return one gradient (or
# None) per input.


def _matmul(saved, a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul: cannot multiply shapes {a.shape} and {b.shape}"
        )
    try:
        return np.matmul(a, b)
    except ValueError as e:
        raise ShapeError(
            f"matmul: cannot multiply shapes {a.shape} and {b.shape}"
        ) from e


def _matmul_grad(saved, g, a, b):
    return (
        np.matmul(g, np.swapaxes(b, -1, -2)),
        np.matmul(np.swapaxes(a, -1, -2), g),
    )


def _add(saved, a, b):
    _broadcast_shape("add", a, b)
    return a + b


def _multiply(saved, a, b):
    _broadcast_shape("multiply", a, b)
    return a * b


def _concat(saved, *arrays, axis=0):
    try:
        return np.concatenate(arrays, axis=axis)
    except ValueError as e:
        shapes = " and ".join(str(a.shape) for a in arrays)
        raise ShapeError(
            f"concat: cannot join shapes {shapes} along axis {axis}"
        ) from e


def _concat_grad(saved, g, *arrays, axis=0):
    bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
    return tuple(np.split(g, bounds, axis=axis))


def _relu(saved, x):
    return np.maximum(x, 0)


def _elu(saved, x):
    out = np.where(x > 0, x, np.expm1(np.minimum(x, 0)))
    saved["out"] = out
    return out


def _tanh(saved, x):
    out = np.tanh(x)
    saved["out"] = out
    return out


def _sigmoid(saved, x):
    out = np.exp(-np.logaddexp(0, -x))
    saved["out"] = out
    return out


def _exp(saved, x):
    out = np.exp(x)
    saved["out"] = out
    return out


def _log(saved, x):
    return np.log(np.maximum(x, LOG_EPSILON))


def _log_grad(saved, g, x):
    return (np.where(x > LOG_EPSILON, g / np.maximum(x, LOG_EPSILON), 0),)


def _sum(saved, x, axis=None, keepdims=False):
    return np.sum(x, axis=axis, keepdims=keepdims)


def _sum_grad(saved, g, x, axis=None, keepdims=False):
    return (_expand_reduced(g, x.shape, axis, keepdims),)


def _mean(saved, x, axis=None, keepdims=False):
    return np.mean(x, axis=axis, keepdims=keepdims)


def _mean_grad(saved, g, x, axis=None, keepdims=False):
    n = _reduced_count(x.shape, axis)
    return (_expand_reduced(g, x.shape, axis, keepdims) / n,)


def _max_over_axis(saved, x, axis=-1, keepdims=False):
    index = np.argmax(x, axis=axis, keepdims=True)
    saved["index"] = index
    out = np.take_along_axis(x, index, axis=axis)
    return out if keepdims else np.squeeze(out, axis=axis)


def _max_over_axis_grad(saved, g, x, axis=-1, keepdims=False):
    if not keepdims:
        g = np.expand_dims(g, axis)
    full = np.zeros_like(x)
    np.put_along_axis(full, saved["index"], g, axis=axis)
    return (full,)


def _softmax(saved, x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)
    saved["out"] = out
    return out


def _softmax_grad(saved, g, x, axis=-1):
    s = saved["out"]
    return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)


def _log_softmax(saved, x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    saved["softmax"] = np.exp(out)
    return out


def _log_softmax_grad(saved, g, x, axis=-1):
    return (g - saved["softmax"] * np.sum(g, axis=axis, keepdims=True),)


def _gather(saved, x, index=None, axis=-1):
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != x.ndim or any(
        i != n
        for d, (i, n) in enumerate(zip(index.shape, x.shape))
        if d != axis % x.ndim
    ):
        raise ShapeError(
            f"gather_along_axis: index shape {index.shape} does not conform "
            f"to input shape {x.shape} on axis {axis}"
        )
    saved["index"] = index
    return np.take_along_axis(x, index, axis=axis)


def _gather_grad(saved, g, x, index=None, axis=-1):
    index = saved["index"]
    positions = list(np.ix_(*[np.arange(n) for n in index.shape]))
    positions[axis % x.ndim] = index
    full = np.zeros_like(x)
    np.add.at(full, tuple(positions), g)
    return (full,)


def _squared_error(saved, a, b):
    _broadcast_shape("squared_error", a, b)
    diff = a - b
    saved["diff"] = diff
    return diff * diff


def _squared_error_grad(saved, g, a, b):
    d = 2 * saved["diff"] * g
    return d, -d


def _reshape(saved, x, shape=None):
    try:
        return np.reshape(x, shape)
    except ValueError as e:
        raise ShapeError(
            f"reshape: cannot reshape {x.shape} to {tuple(shape)}"
        ) from e


_register("matmul", _matmul, _matmul_grad)
_register("add", _add, lambda s, g, a, b: (g, g))
_register("multiply", _multiply, lambda s, g, a, b: (g * b, g * a))
_register("concat", _concat, _concat_grad)
_register("relu", _relu, lambda s, g, x: (g * (x > 0),))
_register(
    "elu", _elu, lambda s, g, x: (g * np.where(x > 0, 1, s["out"] + 1),)
)
_register("tanh", _tanh, lambda s, g, x: (g * (1 - s["out"] ** 2),))
_register(
    "sigmoid", _sigmoid, lambda s, g, x: (g * s["out"] * (1 - s["out"]),)
)
_register("abs", lambda s, x: np.abs(x), lambda s, g, x: (g * np.sign(x),))
_register("exp", _exp, lambda s, g, x: (g * s["out"],))
_register("log", _log, _log_grad)
_register("sum", _sum, _sum_grad)
_register("mean", _mean, _mean_grad)
_register("max_over_axis", _max_over_axis, _max_over_axis_grad)
_register("softmax_over_axis", _softmax, _softmax_grad)
_register("log_softmax_over_axis", _log_softmax, _log_softmax_grad)
_register("gather_along_axis", _gather, _gather_grad)
_register("squared_error", _squared_error, _squared_error_grad)
_register("stop_gradient", lambda s, x: np.array(x), None)
_register(
    "reshape", _reshape, lambda s, g, x, shape=None: (g.reshape(x.shape),)
)


class Graph:
    """An append-only tape of operations.

    Args:
        record: If False, operations are evaluated but not recorded and their
            outputs never require gradients.
        dtype: The floating point type every operation computes in.
    """

    def __init__(self, record: bool = True, dtype=DTYPE):
        self.record = record
        self.dtype = np.dtype(dtype)
        self.nodes: list[Node] = []

    def constant(self, value) -> Tensor:
        """Wrap a value as a tensor that never requires a gradient."""
        return Tensor(value, dtype=self.dtype)

    def forward(self, op: str, *inputs, **attrs) -> Tensor:
        """Evaluate an operation and, if recording, append it to the tape.

        Args:
            op: The operation tag, see `op_tags`.
            inputs: Tensors, numpy arrays or scalars. Anything that is not a
                Tensor is treated as a constant.
            attrs: Keyword attributes of the operation, e.g. axis.

        Returns:
            The output tensor.
        """
        if op not in _OPS:
            raise GraphError(f"Unknown operation '{op}'")

        tensors = tuple(
            t if isinstance(t, Tensor) else self.constant(t) for t in inputs
        )
        arrays = tuple(np.asarray(t.data, dtype=self.dtype) for t in tensors)
        saved = {}
        value = _OPS[op].forward(saved, *arrays, **attrs)

        out = Tensor.__new__(Tensor)
        out.data = np.asarray(value, dtype=self.dtype)
        out.grad = None
        out.name = None
        out._graph = None
        out.requires_grad = (
            self.record
            and op != "stop_gradient"
            and any(t.requires_grad for t in tensors)
        )
        if self.record:
            out._graph = self
            self.nodes.append(Node(op, tensors, out, arrays, attrs, saved))

        return out

    def backward(self, loss: Tensor):
        """Back-propagate from a scalar loss.

        Gradients of leaf tensors that require them are accumulated into
        their `grad` slots. Flow stops at stop_gradient nodes.
        """
        if loss.size != 1:
            raise GraphError(
                f"backward requires a scalar loss, got shape {loss.shape}"
            )
        if loss._graph is not self:
            raise GraphError("The loss was not produced by this graph")

        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None or _OPS[node.op].backward is None:
                continue

            input_grads = _OPS[node.op].backward(
                node.saved, g, *node.arrays, **node.attrs
            )
            for t, tg in zip(node.inputs, input_grads):
                if tg is None or not t.requires_grad:
                    continue
                tg = _unbroadcast(np.asarray(tg), t.shape)
                if t._graph is self:
                    key = id(t)
                    grads[key] = tg if key not in grads else grads[key] + tg
                elif t.grad is None:
                    t.grad = np.array(tg, dtype=t.data.dtype)
                else:
                    t.grad = t.grad + tg

    # Named operations

    def matmul(self, a, b) -> Tensor:
        return self.forward("matmul", a, b)

    def add(self, a, b) -> Tensor:
        return self.forward("add", a, b)

    def multiply(self, a, b) -> Tensor:
        return self.forward("multiply", a, b)

    def concat(self, tensors: Sequence, axis: int = 0) -> Tensor:
        return self.forward("concat", *tensors, axis=axis)

    def relu(self, x) -> Tensor:
        return self.forward("relu", x)

    def elu(self, x) -> Tensor:
        return self.forward("elu", x)

    def tanh(self, x) -> Tensor:
        return self.forward("tanh", x)

    def sigmoid(self, x) -> Tensor:
        return self.forward("sigmoid", x)

    def abs(self, x) -> Tensor:
        return self.forward("abs", x)

    def exp(self, x) -> Tensor:
        return self.forward("exp", x)

    def log(self, x) -> Tensor:
        return self.forward("log", x)

    def sum(self, x, axis=None, keepdims: bool = False) -> Tensor:
        return self.forward("sum", x, axis=axis, keepdims=keepdims)

    def mean(self, x, axis=None, keepdims: bool = False) -> Tensor:
        return self.forward("mean", x, axis=axis, keepdims=keepdims)

    def max(self, x, axis: int = -1, keepdims: bool = False) -> Tensor:
        return self.forward(
            "max_over_axis", x, axis=axis, keepdims=keepdims
        )

    def softmax(self, x, axis: int = -1) -> Tensor:
        return self.forward("softmax_over_axis", x, axis=axis)

    def log_softmax(self, x, axis: int = -1) -> Tensor:
        return self.forward("log_softmax_over_axis", x, axis=axis)

    def gather(self, x, index, axis: int = -1) -> Tensor:
        return self.forward("gather_along_axis", x, index=index, axis=axis)

    def squared_error(self, a, b) -> Tensor:
        return self.forward("squared_error", a, b)

    def stop_gradient(self, x) -> Tensor:
        return self.forward("stop_gradient", x)

    def reshape(self, x, shape: Sequence[int]) -> Tensor:
        return self.forward("reshape", x, shape=tuple(shape))

    # Compositions of the operations above

    def negate(self, x) -> Tensor:
        return self.multiply(x, -1.0)

    def subtract(self, a, b) -> Tensor:
        return self.add(a, self.negate(b))

    def scale(self, x, factor: float) -> Tensor:
        return self.multiply(x, float(factor))

    def masked_mean(self, x, mask) -> Tensor:
        """Mean of x over the entries where mask is 1. An all-zero mask gives
        0."""
        mask = np.asarray(mask, dtype=self.dtype)
        count = max(float(mask.sum()), 1.0)
        return self.scale(self.sum(self.multiply(x, mask)), 1.0 / count)
