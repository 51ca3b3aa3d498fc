"""Closed-form operator norms of convolutional, dense and batch-norm layers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AssumptionViolated,
    KernelValueError,
    NonPositiveSigma,
    PaddingPresent,
    ShapeMismatch,
)
from .geometry import ConvGeometry, axis_offsets, check_assumption1, output_dims


@dataclass(frozen=True, eq=False)
class Kernel4D:
    """A convolution kernel bound to the geometry it is applied with.

    ``data`` has shape ``(d_out, d_in, k1, k2)`` and is stored as a read-only
    float64 copy. NaN and Inf are rejected.
    """

    geometry: ConvGeometry
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True, order="C")
        if arr.shape != self.geometry.kernel_shape:
            raise KernelValueError(
                f"kernel shape {arr.shape} does not match geometry {self.geometry.kernel_shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise KernelValueError("kernel contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data, input_hw, stride=1, padding=0) -> "Kernel4D":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 4:
            raise KernelValueError(f"expected a 4D kernel, got shape {data.shape}")
        return cls(ConvGeometry.for_kernel_shape(data.shape, input_hw, stride, padding), data)

    def with_data(self, data) -> "Kernel4D":
        """Same geometry, new values."""
        return Kernel4D(self.geometry, data)

    @property
    def shape(self):
        return self.data.shape

    def __getitem__(self, idx):
        return self.data[idx]


def _require_assumption(g: ConvGeometry):
    if not check_assumption1(g):
        raise AssumptionViolated(
            f"kernel {g.k1}x{g.k2} with stride ({g.s1},{g.s2}) and padding ({g.p1},{g.p2}) "
            f"cannot be placed inside the {g.h_in}x{g.w_in} input; closed-form norm is not exact"
        )


def l1_class_sums(kernel: Kernel4D) -> np.ndarray:
    """Absolute mass of every (input channel, index class) pair.

    Returns an array ``S`` of shape ``(d_in, k1, k2)`` where ``S[j, a, b]`` is
    the sum of ``|K[i, j, c, d]|`` over all output channels ``i`` and all
    ``(c, d)`` in the class anchored at 0-based ``(a, b)``. Duplicate classes
    show up as duplicate entries.
    """
    g = kernel.geometry
    slack1, slack2 = g.slack
    rows = axis_offsets(g.k1, g.s1, slack1).astype(np.float64)
    cols = axis_offsets(g.k2, g.s2, slack2).astype(np.float64)
    col_mass = np.abs(kernel.data).sum(axis=0)
    return np.einsum("ac,jcd,bd->jab", rows, col_mass, cols)


def l1_norm(kernel: Kernel4D) -> float:
    """Exact l1 operator norm (max absolute column sum of the operator).

    Raises
    ------
    AssumptionViolated
        If the kernel cannot sit fully inside the unpadded input.
    """
    _require_assumption(kernel.geometry)
    return float(l1_class_sums(kernel).max())


def linf_norm(kernel: Kernel4D) -> float:
    """Exact l-infinity operator norm: the largest absolute mass of one
    output-channel slice ``K[i]``. Independent of the input size."""
    _require_assumption(kernel.geometry)
    return float(linf_row_sums(kernel).max())


def linf_row_sums(kernel: Kernel4D) -> np.ndarray:
    d_out = kernel.geometry.d_out
    return np.abs(kernel.data).reshape(d_out, -1).sum(axis=1)


def _spatial_energy(kernel: Kernel4D) -> float:
    h_out, w_out = output_dims(kernel.geometry)
    return math.sqrt(h_out * w_out * float(np.square(kernel.data).sum()))


def l2_upper_bound(kernel: Kernel4D) -> float:
    """Upper bound ``sqrt(h_out * w_out * sum(K**2))`` on the spectral norm."""
    _require_assumption(kernel.geometry)
    return _spatial_energy(kernel)


def frobenius_exact(kernel: Kernel4D) -> float:
    """Frobenius norm of the operator matrix, exact only without padding.

    Every output pixel then sees the complete kernel slice, so each slice
    appears ``h_out * w_out`` times in the matrix.
    """
    g = kernel.geometry
    if g.p1 or g.p2:
        raise PaddingPresent(f"padding ({g.p1},{g.p2}) present; Frobenius formula is only exact without it")
    _require_assumption(g)
    return _spatial_energy(kernel)


def dense_norms(weight) -> tuple[float, float]:
    """``(l1, linf)`` of a dense weight matrix."""
    w = np.asarray(weight, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {w.shape}")
    if w.size == 0:
        return 0.0, 0.0
    a = np.abs(w)
    return float(a.sum(axis=0).max()), float(a.sum(axis=1).max())


def bn_norm(gamma, sigma) -> float:
    """Operator norm of inference-time batch norm, ``max |gamma_i| / sigma_i``.

    The same value for l1, l2 and linf since the map is a diagonal scaling
    (plus a shift that does not affect the norm).
    """
    gamma = np.asarray(gamma, dtype=np.float64).ravel()
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if gamma.shape != sigma.shape:
        raise ShapeMismatch(f"gamma has {gamma.size} entries, sigma has {sigma.size}")
    if np.any(~(sigma > 0)):
        raise NonPositiveSigma("all sigma entries must be > 0")
    if gamma.size == 0:
        return 0.0
    return float(np.max(np.abs(gamma) / sigma))


@dataclass(frozen=True)
class NormReport:
    """Norms of one convolutional layer.

    When the kernel-placement assumption fails, ``l1``, ``linf`` and
    ``l2_upper`` are None and ``oracle_fallback`` is set: callers should go
    to :mod:`convnorm.oracle` for ground truth.
    """

    l1: Optional[float]
    linf: Optional[float]
    l2_upper: Optional[float]
    frobenius: Optional[float]
    assumption1_holds: bool
    oracle_fallback: bool = False

    def as_dict(self) -> dict:
        return {
            "l1": self.l1,
            "linf": self.linf,
            "l2_upper": self.l2_upper,
            "frobenius": self.frobenius,
            "assumption1_holds": self.assumption1_holds,
            "oracle_fallback": self.oracle_fallback,
        }


def norm_report(kernel: Kernel4D) -> NormReport:
    g = kernel.geometry
    if not check_assumption1(g):
        return NormReport(None, None, None, None, False, oracle_fallback=True)
    frob = frobenius_exact(kernel) if g.p1 == 0 and g.p2 == 0 else None
    return NormReport(
        l1=l1_norm(kernel),
        linf=linf_norm(kernel),
        l2_upper=l2_upper_bound(kernel),
        frobenius=frob,
        assumption1_holds=True,
    )
