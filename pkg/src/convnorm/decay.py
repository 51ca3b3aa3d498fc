"""Norm decay: penalize layer l1/linf norms with sparse sign subgradients.

The penalty gradient of each layer is smoothed by a momentum buffer ``h``
before being added to the task gradient, scaled by ``beta / N`` where ``N``
is the number of regularized layers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ShapeMismatch
from .geometry import axis_offsets
from .norms import Kernel4D, _require_assumption, dense_norms, l1_class_sums, l1_norm, linf_norm, linf_row_sums

Layer = Union[Kernel4D, np.ndarray]


class NormKind(str, enum.Enum):
    L1 = "l1"
    LINF = "linf"


def norm_subgradient(kernel: Kernel4D, kind: NormKind) -> np.ndarray:
    """A subgradient of the closed-form l1 or linf norm w.r.t. the kernel.

    Only the entries that make up the maximizing sum are nonzero, and they
    equal ``sign(K)`` (with ``sign(0) = 0``). Ties go to the lowest index:
    lowest output channel for linf; lowest input channel, then the
    lexicographically smallest class anchor for l1.
    """
    kind = NormKind(kind)
    g = kernel.geometry
    _require_assumption(g)
    K = kernel.data
    grad = np.zeros_like(K)
    if kind is NormKind.LINF:
        i = int(np.argmax(linf_row_sums(kernel)))
        grad[i] = np.sign(K[i])
        return grad
    sums = l1_class_sums(kernel)
    j, a, b = np.unravel_index(int(np.argmax(sums)), sums.shape)
    slack1, slack2 = g.slack
    mask = np.outer(axis_offsets(g.k1, g.s1, slack1)[a], axis_offsets(g.k2, g.s2, slack2)[b])
    grad[:, j] = np.sign(K[:, j]) * mask
    return grad


def dense_subgradient(weight, kind: NormKind) -> np.ndarray:
    """Sign pattern of the max-mass column (l1) or row (linf) of a matrix."""
    kind = NormKind(kind)
    W = np.asarray(weight, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {W.shape}")
    grad = np.zeros_like(W)
    if W.size == 0:
        return grad
    A = np.abs(W)
    if kind is NormKind.L1:
        j = int(np.argmax(A.sum(axis=0)))
        grad[:, j] = np.sign(W[:, j])
    else:
        i = int(np.argmax(A.sum(axis=1)))
        grad[i] = np.sign(W[i])
    return grad


def _values(layer: Layer) -> np.ndarray:
    return layer.data if isinstance(layer, Kernel4D) else np.asarray(layer, dtype=np.float64)


def layer_norm(layer: Layer, kind: NormKind) -> float:
    kind = NormKind(kind)
    if isinstance(layer, Kernel4D):
        return l1_norm(layer) if kind is NormKind.L1 else linf_norm(layer)
    l1, linf = dense_norms(layer)
    return l1 if kind is NormKind.L1 else linf


def layer_subgradient(layer: Layer, kind: NormKind) -> np.ndarray:
    if isinstance(layer, Kernel4D):
        return norm_subgradient(layer, kind)
    return dense_subgradient(layer, kind)


@dataclass
class DecayState:
    """Momentum buffers, one per regularized layer, initialized to zero."""

    buffers: list
    gamma: float = 0.5
    beta: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.buffers:
            raise ValueError("need at least one layer")

    @classmethod
    def zeros_like(cls, params: Sequence[Layer], gamma: float = 0.5, beta: float = 1e-3) -> "DecayState":
        return cls([np.zeros_like(_values(p)) for p in params], gamma=gamma, beta=beta)

    @property
    def n_layers(self) -> int:
        return len(self.buffers)


Optimizer = Callable[[int, np.ndarray, np.ndarray, float], np.ndarray]


def sgd(index: int, value: np.ndarray, grad: np.ndarray, step_size: float) -> np.ndarray:
    """Plain gradient descent step."""
    return value - step_size * grad


@dataclass
class MomentumSGD:
    """Heavy-ball SGD usable as the ``optimizer`` of :func:`decay_step`."""

    momentum: float = 0.9
    velocity: dict = field(default_factory=dict)

    def __call__(self, index, value, grad, step_size):
        v = self.momentum * self.velocity.get(index, 0.0) + grad
        self.velocity[index] = v
        return value - step_size * v


def decay_step(
    state: DecayState,
    params: Sequence[Layer],
    task_grad: Sequence[np.ndarray],
    kind: NormKind,
    step_size: float,
    optimizer: Optional[Optimizer] = None,
) -> tuple[list, DecayState]:
    """One norm-decay update.

    Subgradients are taken at the incoming parameters, the buffers become
    ``gamma * h + (1 - gamma) * p``, and each layer moves along
    ``task_grad + beta / N * h``. ``state`` is updated in place and also
    returned. Kernels come back as new :class:`Kernel4D` objects with the
    same geometry.
    """
    kind = NormKind(kind)
    optimizer = optimizer or sgd
    n = state.n_layers
    if len(params) != n or len(task_grad) != n:
        raise ShapeMismatch(f"expected {n} layers, got {len(params)} params and {len(task_grad)} gradients")
    updated = []
    for idx, (layer, tg) in enumerate(zip(params, task_grad)):
        value = _values(layer)
        tg = np.asarray(tg, dtype=np.float64)
        if tg.shape != value.shape or state.buffers[idx].shape != value.shape:
            raise ShapeMismatch(f"layer {idx}: param {value.shape}, grad {tg.shape}, buffer {state.buffers[idx].shape}")
        p = layer_subgradient(layer, kind)
        h = state.gamma * state.buffers[idx] + (1.0 - state.gamma) * p
        state.buffers[idx] = h
        g = tg + (state.beta / n) * h
        new_value = optimizer(idx, value, g, step_size)
        updated.append(layer.with_data(new_value) if isinstance(layer, Kernel4D) else new_value)
    return updated, state


@dataclass(frozen=True)
class DecayConfig:
    kind: NormKind = NormKind.L1
    beta: float = 1.0
    gamma: float = 0.5
    steps: int = 200
    step_size: float = 1e-2


@dataclass
class DecayTrace:
    """``norms[s, l]`` is the norm of layer ``l`` after ``s`` steps
    (row 0 holds the initial norms)."""

    norms: np.ndarray
    layers: list

    def rows(self):
        """``(step, layer, norm)`` triples in step-major order."""
        for s in range(self.norms.shape[0]):
            for l in range(self.norms.shape[1]):
                yield s, l, float(self.norms[s, l])


def run_decay_demo(layers: Sequence[Layer], config: DecayConfig = DecayConfig()) -> DecayTrace:
    """Run norm decay with a zero task gradient and record every layer's norm."""
    kind = NormKind(config.kind)
    params = list(layers)
    state = DecayState.zeros_like(params, gamma=config.gamma, beta=config.beta)
    zeros = [np.zeros_like(_values(p)) for p in params]
    norms = np.empty((config.steps + 1, len(params)))
    norms[0] = [layer_norm(p, kind) for p in params]
    for s in range(1, config.steps + 1):
        params, state = decay_step(state, params, zeros, kind, config.step_size)
        norms[s] = [layer_norm(p, kind) for p in params]
    return DecayTrace(norms, params)


def make_toy_model(seed: int = 0) -> list:
    """Three small convolutions (8x8 -> 8x8 -> 4x4 -> 2x2) with Gaussian
    weights scaled by ``1 / sqrt(fan_in)``."""
    rng = np.random.default_rng(seed)

    def init(shape):
        return rng.standard_normal(shape) / np.sqrt(np.prod(shape[1:]))

    return [
        Kernel4D.from_array(init((4, 3, 3, 3)), input_hw=8, stride=1, padding=1),
        Kernel4D.from_array(init((4, 4, 3, 3)), input_hw=8, stride=2, padding=1),
        Kernel4D.from_array(init((2, 4, 3, 3)), input_hw=4, stride=1, padding=0),
    ]
