"""Brute-force ground truth for the closed-form norms.

Everything here works directly on the convolution or on its dense matrix, so
it is slow but needs no assumption about kernel placement.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeMismatch, SizeOverflow
from .geometry import output_dims
from .norms import Kernel4D

DEFAULT_SIZE_CAP = 10**8


def size_cap() -> int:
    """Entry cap for :func:`materialize`; ``CONVNORM_SIZE_CAP`` overrides it."""
    raw = os.environ.get("CONVNORM_SIZE_CAP")
    return int(float(raw)) if raw else DEFAULT_SIZE_CAP


def _check_input(kernel: Kernel4D, x: np.ndarray) -> None:
    g = kernel.geometry
    if x.shape[-3:] != g.input_shape:
        raise ShapeMismatch(f"input trailing shape {x.shape[-3:]} != {g.input_shape}")


def conv_forward(kernel: Kernel4D, x) -> np.ndarray:
    """Cross-correlation with zero padding and strides, no bias.

    ``x`` has shape ``(..., d_in, h_in, w_in)``; leading axes are batch axes.
    Returns ``(..., d_out, h_out, w_out)``.
    """
    g = kernel.geometry
    x = np.asarray(x, dtype=np.float64)
    _check_input(kernel, x)
    h_out, w_out = output_dims(g)
    pad = [(0, 0)] * (x.ndim - 2) + [(g.p1, g.p1), (g.p2, g.p2)]
    xp = np.pad(x, pad)
    out = np.zeros(x.shape[:-3] + (g.d_out, h_out * w_out))
    # contiguous (k1, k2, d_out, d_in) so each tap's matmul stays on BLAS
    K = np.ascontiguousarray(kernel.data.transpose(2, 3, 0, 1))
    for k in range(g.k1):
        for t in range(g.k2):
            patch = xp[..., k : k + g.s1 * (h_out - 1) + 1 : g.s1, t : t + g.s2 * (w_out - 1) + 1 : g.s2]
            out += np.matmul(K[k, t], patch.reshape(patch.shape[:-2] + (-1,)))
    return out.reshape(x.shape[:-3] + (g.d_out, h_out, w_out))


def conv_adjoint(kernel: Kernel4D, y) -> np.ndarray:
    """Transpose of :func:`conv_forward`, mapping outputs back to inputs."""
    g = kernel.geometry
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-3:] != g.output_shape:
        raise ShapeMismatch(f"output trailing shape {y.shape[-3:]} != {g.output_shape}")
    h_out, w_out = output_dims(g)
    batch = y.shape[:-3]
    xp = np.zeros(batch + (g.d_in, g.h_in + 2 * g.p1, g.w_in + 2 * g.p2))
    K = np.ascontiguousarray(kernel.data.transpose(2, 3, 1, 0))
    y_flat = y.reshape(batch + (g.d_out, h_out * w_out))
    for k in range(g.k1):
        for t in range(g.k2):
            back = np.matmul(K[k, t], y_flat).reshape(batch + (g.d_in, h_out, w_out))
            xp[..., k : k + g.s1 * (h_out - 1) + 1 : g.s1, t : t + g.s2 * (w_out - 1) + 1 : g.s2] += back
    return xp[..., g.p1 : g.p1 + g.h_in, g.p2 : g.p2 + g.w_in]


@dataclass(frozen=True)
class LinearMap:
    """Dense matrix of a convolution acting on channel-major, row-major
    flattened inputs (``x.reshape(-1)`` of a ``(d_in, h_in, w_in)`` array)."""

    matrix: np.ndarray

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.float64).reshape(-1)

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.matrix.T)


def materialize(kernel: Kernel4D, cap: int | None = None, chunk: int = 4096) -> LinearMap:
    """Build the dense operator matrix column by column: column ``n`` is the
    convolution of the ``n``-th standard basis input.

    Raises
    ------
    SizeOverflow
        If ``rows * cols`` exceeds ``cap`` (default :func:`size_cap`).
    """
    g = kernel.geometry
    rows, cols = g.matrix_shape
    cap = size_cap() if cap is None else cap
    if rows * cols > cap:
        raise SizeOverflow(f"operator would have {rows * cols} entries, cap is {cap}")
    M = np.empty((rows, cols))
    for start in range(0, cols, chunk):
        stop = min(start + chunk, cols)
        basis = np.zeros((stop - start, cols))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out = conv_forward(kernel, basis.reshape((stop - start,) + g.input_shape))
        M[:, start:stop] = out.reshape(stop - start, rows).T
    return LinearMap(M)


def _as_matrix(M) -> np.ndarray:
    return M.matrix if isinstance(M, LinearMap) else np.asarray(M, dtype=np.float64)


def matrix_l1(M) -> float:
    """Maximum absolute column sum."""
    A = _as_matrix(M)
    return float(np.abs(A).sum(axis=0).max()) if A.size else 0.0


def matrix_linf(M) -> float:
    """Maximum absolute row sum."""
    A = _as_matrix(M)
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def matrix_frobenius(M) -> float:
    return float(np.sqrt(np.square(_as_matrix(M)).sum()))


def dense_spectral_norm(M) -> float:
    """Largest singular value via a full SVD; the ground truth for small maps."""
    A = _as_matrix(M)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


@dataclass(frozen=True)
class PowerIterationResult:
    sigma: float
    converged: bool
    n_iter: int

    def __float__(self):
        return self.sigma


def _power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    n: int,
    max_iters: int,
    tol: float,
    seed: int,
) -> PowerIterationResult:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(1, max_iters + 1):
        u = apply(v)
        # ||A v|| for unit v is the square root of the Rayleigh quotient of A^T A
        new_sigma = float(np.linalg.norm(u))
        w = adjoint(u)
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return PowerIterationResult(new_sigma, True, it)
        v = w / w_norm
        if it > 1 and abs(new_sigma - sigma) < tol:
            return PowerIterationResult(new_sigma, True, it)
        sigma = new_sigma
    return PowerIterationResult(sigma, False, max_iters)


def power_iteration_l2(
    kernel: Kernel4D,
    max_iters: int = 10_000,
    tol: float = 1e-10,
    seed: int = 0,
) -> PowerIterationResult:
    """Estimate the spectral norm of the convolution without forming its matrix.

    Alternates :func:`conv_forward` and :func:`conv_adjoint` starting from a
    seeded Gaussian unit vector and stops once successive estimates differ by
    less than ``tol``. ``converged`` is False if ``max_iters`` ran out; the
    last estimate is still returned. Pass ``tol=0`` for a fixed iteration
    budget.

    When the top two singular values are close the estimate creeps up slowly
    and the remaining error can be far larger than ``tol`` (roughly
    ``tol / (1 - (s2/s1)**2)``). Tighten ``tol`` for such spectra.
    """
    g = kernel.geometry
    in_shape = g.input_shape
    out_shape = g.output_shape

    def apply(v):
        return conv_forward(kernel, v.reshape(in_shape)).reshape(-1)

    def adjoint(u):
        return conv_adjoint(kernel, u.reshape(out_shape)).reshape(-1)

    return _power_iteration(apply, adjoint, int(np.prod(in_shape)), max_iters, tol, seed)


def power_iteration_matrix(M, max_iters: int = 10_000, tol: float = 1e-10, seed: int = 0) -> PowerIterationResult:
    """Same iteration as :func:`power_iteration_l2` on an explicit matrix."""
    A = _as_matrix(M)
    return _power_iteration(A.__matmul__, A.T.__matmul__, A.shape[1], max_iters, tol, seed)


@dataclass(frozen=True)
class ZeroLipschitzNet:
    """ReLU network with diagonal weights whose output is identically zero.

    Layer ``pair`` and ``pair + 1`` have complementary supports, so whatever
    survives the first of them is multiplied by zero in the second. Every
    layer may still have an arbitrarily large norm.
    """

    diagonals: tuple
    pair: int

    def __post_init__(self):
        diags = tuple(np.array(d, dtype=np.float64).ravel() for d in self.diagonals)
        if len(diags) < 2:
            raise ValueError("need at least two layers")
        width = diags[0].size
        if any(d.size != width for d in diags):
            raise ShapeMismatch("diagonal layers must all have the same width")
        if not 0 <= self.pair < len(diags) - 1:
            raise ValueError(f"pair index {self.pair} out of range for {len(diags)} layers")
        if np.any(diags[self.pair] * diags[self.pair + 1] != 0):
            raise ValueError("designated layers do not have complementary zero patterns")
        for d in diags:
            d.setflags(write=False)
        object.__setattr__(self, "diagonals", diags)

    @property
    def n_layers(self) -> int:
        return len(self.diagonals)

    def forward(self, x) -> np.ndarray:
        """Evaluate on ``x`` of shape ``(..., width)``."""
        x = np.asarray(x, dtype=np.float64)
        for d in self.diagonals:
            x = np.maximum(x * d, 0.0)
        return x

    def layer_norms(self) -> np.ndarray:
        """Per-layer operator norm; l1, l2 and linf coincide for diagonal maps."""
        return np.array([np.abs(d).max() for d in self.diagonals])

    def empirical_lipschitz(self, x1, x2) -> float:
        """Largest ``||f(x1) - f(x2)|| / ||x1 - x2||`` over paired rows."""
        num = np.linalg.norm(self.forward(x1) - self.forward(x2), axis=-1)
        den = np.linalg.norm(np.asarray(x1) - np.asarray(x2), axis=-1)
        keep = den > 0
        return float((num[keep] / den[keep]).max()) if keep.any() else 0.0


def build_zero_lipschitz_net(layer_dims: Sequence[int], magnitude: float = 1.0, seed: int = 0) -> ZeroLipschitzNet:
    """Random :class:`ZeroLipschitzNet` whose every layer norm is >= ``magnitude``.

    ``layer_dims`` gives the width of each layer (all equal, since the weights
    are diagonal, and at least 2 so both halves of the designated pair keep a
    nonzero entry). Nonzero entries have absolute value in
    ``[magnitude, 2 * magnitude)`` with random signs.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("need at least two layers")
    if len(set(dims)) != 1:
        raise ShapeMismatch(f"diagonal layers need equal widths, got {dims}")
    width = dims[0]
    if width < 2:
        raise ValueError("width must be >= 2 so both complementary layers are nonzero")
    if not magnitude > 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng(seed)

    def entries():
        return rng.choice([-1.0, 1.0], size=width) * magnitude * (1.0 + rng.random(width))

    L = len(dims)
    pair = int(rng.integers(0, L - 1))
    diags = [entries() for _ in range(L)]
    support = np.zeros(width, dtype=bool)
    support[rng.permutation(width)[: rng.integers(1, width)]] = True
    diags[pair][~support] = 0.0
    diags[pair + 1][support] = 0.0
    return ZeroLipschitzNet(tuple(diags), pair)
