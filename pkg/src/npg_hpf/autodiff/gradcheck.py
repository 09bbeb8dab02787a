from typing import Callable, Sequence

import numpy as np

from npg_hpf.autodiff.tensor import Graph, Tensor

"""Finite-difference checking of gradients.

Analytic gradients are computed at the working precision (float32). The
central differences they are compared with are computed on float64 copies of
the leaves, so that the comparison measures the error of the backward rules
rather than the rounding error of the differences.
"""

DENOMINATOR_FLOOR = 1e-2


def _evaluate(build_loss: Callable[[Graph], Tensor]) -> float:
    return build_loss(Graph(record=False, dtype=np.float64)).item()


def numerical_gradient(
    build_loss: Callable[[Graph], Tensor], leaf: Tensor, eps: float
) -> np.ndarray:
    """Return the central-difference gradient of a loss w.r.t. one leaf."""
    original = leaf.data
    work = original.astype(np.float64)
    flat = work.reshape(-1)
    grad = np.zeros_like(flat)
    leaf.data = work
    try:
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            up = _evaluate(build_loss)
            flat[i] = saved - eps
            down = _evaluate(build_loss)
            flat[i] = saved
            grad[i] = (up - down) / (2 * eps)
    finally:
        leaf.data = original

    return grad.reshape(original.shape)


def gradcheck(
    build_loss: Callable[[Graph], Tensor],
    leaves: Sequence[Tensor],
    eps: float = 1e-6,
) -> float:
    """Compare analytic and central-difference gradients.

    Args:
        build_loss: A function building a scalar loss on the graph it is
            given. It is called once with a recording graph and many times
            with non-recording float64 graphs.
        leaves: The tensors to check. They must require gradients.
        eps: The finite-difference step.

    Returns:
        The maximum relative error |a - n| / max(|a|, |n|, 1e-2) over all
        elements of all leaves.
    """
    for leaf in leaves:
        leaf.zero_grad()
    graph = Graph()
    graph.backward(build_loss(graph))

    worst = 0.0
    for leaf in leaves:
        analytic = (
            np.zeros(leaf.shape) if leaf.grad is None else leaf.grad
        ).astype(np.float64)
        numeric = numerical_gradient(build_loss, leaf, eps)
        scale = np.maximum(
            np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR
        )
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))

    return worst
