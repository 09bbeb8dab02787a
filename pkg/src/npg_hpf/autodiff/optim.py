from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from npg_hpf.autodiff.nn import Parameter
from npg_hpf.autodiff.tensor import ShapeError

"""Gradient-descent optimisers.

The update rules are available as pure functions over arrays
(`rmsprop_step`, `adam_step`) and wrapped by optimiser classes that own the
accumulator state for a fixed list of parameters.
"""


@dataclass
class RMSpropState:
    lr: float = 5e-4
    alpha: float = 0.99
    eps: float = 1e-5
    square_avg: list[np.ndarray] = field(default_factory=list)


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    exp_avg: list[np.ndarray] = field(default_factory=list)
    exp_avg_sq: list[np.ndarray] = field(default_factory=list)


def _check_shapes(params, grads, *accumulators):
    if len(params) != len(grads):
        raise ShapeError(
            f"optimiser step: {len(params)} parameters but {len(grads)} "
            f"gradients"
        )
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(
                f"optimiser step: parameter {i} has shape {p.shape}, "
                f"gradient has shape {g.shape}"
            )
        for acc in accumulators:
            if acc[i].shape != p.shape:
                raise ShapeError(
                    f"optimiser step: parameter {i} has shape {p.shape}, "
                    f"accumulator has shape {acc[i].shape}"
                )


def rmsprop_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: RMSpropState,
) -> list[np.ndarray]:
    """Return updated parameters; square averages in `state` are updated in
    place. Empty accumulators are initialised to zeros."""
    if not state.square_avg:
        state.square_avg = [np.zeros_like(p) for p in params]
    _check_shapes(params, grads, state.square_avg)

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        sq = state.alpha * state.square_avg[i] + (1 - state.alpha) * g * g
        state.square_avg[i] = sq.astype(p.dtype)
        step = state.lr * g / (np.sqrt(sq) + state.eps)
        updated.append((p - step).astype(p.dtype))

    return updated


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
) -> list[np.ndarray]:
    """Return updated parameters; moments and the step counter in `state`
    are updated in place. Empty accumulators are initialised to zeros."""
    if not state.exp_avg:
        state.exp_avg = [np.zeros_like(p) for p in params]
        state.exp_avg_sq = [np.zeros_like(p) for p in params]
    _check_shapes(params, grads, state.exp_avg, state.exp_avg_sq)

    state.step += 1
    correction1 = 1 - state.beta1**state.step
    correction2 = 1 - state.beta2**state.step

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.beta1 * state.exp_avg[i] + (1 - state.beta1) * g
        v = state.beta2 * state.exp_avg_sq[i] + (1 - state.beta2) * g * g
        state.exp_avg[i] = m.astype(p.dtype)
        state.exp_avg_sq[i] = v.astype(p.dtype)
        step = (
            state.lr
            * (m / correction1)
            / (np.sqrt(v / correction2) + state.eps)
        )
        updated.append((p - step).astype(p.dtype))

    return updated


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Scale gradients in place so that their joint L2 norm is at most
    max_norm. Returns the norm before clipping."""
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / (norm + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * factor).astype(p.grad.dtype)
    return norm


class Optimizer(ABC):
    """An optimiser over a fixed list of parameters.

    Parameters without a gradient are treated as having a zero gradient.
    """

    def __init__(self, params: Sequence[Parameter]):
        self.params = list(params)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        grads = [
            np.zeros_like(p.data) if p.grad is None else p.grad
            for p in self.params
        ]
        updated = self._update([p.data for p in self.params], grads)
        for p, value in zip(self.params, updated):
            p.data = value

    @abstractmethod
    def _update(self, params, grads) -> list[np.ndarray]:
        raise NotImplementedError


class RMSprop(Optimizer):
    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 5e-4,
        alpha: float = 0.99,
        eps: float = 1e-5,
    ):
        super().__init__(params)
        self.state = RMSpropState(lr=lr, alpha=alpha, eps=eps)

    def _update(self, params, grads) -> list[np.ndarray]:
        return rmsprop_step(params, grads, self.state)


class Adam(Optimizer):
    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 5e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        super().__init__(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def _update(self, params, grads) -> list[np.ndarray]:
        return adam_step(params, grads, self.state)
