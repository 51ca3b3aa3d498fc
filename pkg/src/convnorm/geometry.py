"""Convolution geometry, the kernel-placement assumption and kernel index classes.

Kernel indices ``(k, t)`` are 1-based throughout this module, so that
``KernelIndex(1, 1)`` is the top-left kernel tap. Arrays elsewhere in the
package stay 0-based; convert with ``k - 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import GeometryError


def _pair(value, name: str) -> tuple[int, int]:
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise GeometryError(f"{name} must be an int or a pair, got {value!r}")
        return int(value[0]), int(value[1])
    return int(value), int(value)


@dataclass(frozen=True)
class ConvGeometry:
    """Everything needed to define a 2D multi-channel convolution operator.

    Padding is symmetric zero padding of ``p1`` rows top and bottom and ``p2``
    columns left and right. ``h_in``/``w_in`` exclude the padding.
    Dilation and grouped convolution are not supported; passing anything
    other than ``1`` for them raises :class:`GeometryError`.
    """

    d_in: int
    d_out: int
    h_in: int
    w_in: int
    k1: int
    k2: int
    s1: int = 1
    s2: int = 1
    p1: int = 0
    p2: int = 0
    dilation: int = field(default=1, repr=False, compare=False)
    groups: int = field(default=1, repr=False, compare=False)

    def __post_init__(self):
        for name in ("d_in", "d_out", "h_in", "w_in", "k1", "k2", "s1", "s2"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise GeometryError(f"{name} must be a positive integer, got {v!r}")
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise GeometryError(f"{name} must be a non-negative integer, got {v!r}")
        if self.dilation != 1:
            raise GeometryError("dilated convolution is not supported")
        if self.groups != 1:
            raise GeometryError("grouped convolution is not supported")
        if self.k1 > self.h_in + 2 * self.p1 or self.k2 > self.w_in + 2 * self.p2:
            raise GeometryError(
                f"kernel {self.k1}x{self.k2} does not fit in padded input "
                f"{self.h_in + 2 * self.p1}x{self.w_in + 2 * self.p2}"
            )

    @classmethod
    def for_kernel_shape(cls, shape, input_hw, stride=1, padding=0) -> "ConvGeometry":
        """Build a geometry from a ``(d_out, d_in, k1, k2)`` kernel shape."""
        d_out, d_in, k1, k2 = (int(n) for n in shape)
        h_in, w_in = _pair(input_hw, "input_hw")
        s1, s2 = _pair(stride, "stride")
        p1, p2 = _pair(padding, "padding")
        return cls(d_in, d_out, h_in, w_in, k1, k2, s1, s2, p1, p2)

    @property
    def kernel_shape(self) -> tuple[int, int, int, int]:
        return (self.d_out, self.d_in, self.k1, self.k2)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.d_in, self.h_in, self.w_in)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        h_out, w_out = output_dims(self)
        return (self.d_out, h_out, w_out)

    @property
    def slack(self) -> tuple[int, int]:
        """How far the kernel can slide inside the padded input, per axis."""
        return (self.h_in + 2 * self.p1 - self.k1, self.w_in + 2 * self.p2 - self.k2)

    @property
    def matrix_shape(self) -> tuple[int, int]:
        """(rows, cols) of the dense operator matrix."""
        return (int(np.prod(self.output_shape)), int(np.prod(self.input_shape)))


def output_dims(g: ConvGeometry) -> tuple[int, int]:
    """Spatial output size ``(h_out, w_out)`` of the convolution."""
    h_out = (g.h_in + 2 * g.p1 - g.k1) // g.s1 + 1
    w_out = (g.w_in + 2 * g.p2 - g.k2) // g.s2 + 1
    return h_out, w_out


def _smallest_positive_multiple(stride: int, padding: int) -> int:
    # smallest c >= 1 with c * stride >= padding
    return max(1, -(-padding // stride))


def check_assumption1(g: ConvGeometry) -> bool:
    """Whether the kernel fits wholly inside the unpadded input at some
    stride-aligned position.

    With ``c`` the smallest positive integer such that ``c * s >= p`` (so
    ``c >= 1`` even when ``p == 0``), both ``k1 + c1*s1 - p1 <= h_in`` and
    ``k2 + c2*s2 - p2 <= w_in`` must hold. The closed-form l1/linf norms are
    exact only when this returns True.
    """
    c1 = _smallest_positive_multiple(g.s1, g.p1)
    c2 = _smallest_positive_multiple(g.s2, g.p2)
    return g.k1 + c1 * g.s1 - g.p1 <= g.h_in and g.k2 + c2 * g.s2 - g.p2 <= g.w_in


class KernelIndex(NamedTuple):
    """1-based position ``(k, t)`` in the spatial part of a kernel."""

    k: int
    t: int


@dataclass(frozen=True)
class IndexClass:
    """Kernel taps that can touch the same input pixel.

    ``members`` always contains ``anchor``. Every member ``(c, d)`` satisfies
    ``c - a`` divisible by the vertical stride and within the vertical slack,
    and the same horizontally.
    """

    anchor: KernelIndex
    members: frozenset

    def __len__(self):
        return len(self.members)

    def __contains__(self, item):
        return KernelIndex(*item) in self.members

    def __iter__(self) -> Iterator[KernelIndex]:
        return iter(sorted(self.members))


@dataclass(frozen=True)
class IndexClassFamily:
    geometry: ConvGeometry
    classes: tuple[IndexClass, ...]

    def __len__(self):
        return len(self.classes)

    def __iter__(self) -> Iterator[IndexClass]:
        return iter(self.classes)

    def by_anchor(self, a: int, b: int) -> IndexClass:
        """Class anchored at ``(a, b)``; works for deduplicated anchors too."""
        anchor = KernelIndex(a, b)
        g = self.geometry
        if not (1 <= a <= g.k1 and 1 <= b <= g.k2):
            raise KeyError(anchor)
        for cls in self.classes:
            if cls.anchor == anchor:
                return cls
        members = frozenset(_class_members(g, a, b))
        for cls in self.classes:
            if cls.members == members:
                return IndexClass(anchor, members)
        raise KeyError(anchor)  # pragma: no cover - family is complete by construction

    def as_masks(self) -> np.ndarray:
        """Boolean array of shape ``(len(self), k1, k2)``, one mask per class."""
        g = self.geometry
        masks = np.zeros((len(self.classes), g.k1, g.k2), dtype=bool)
        for n, cls in enumerate(self.classes):
            for k, t in cls.members:
                masks[n, k - 1, t - 1] = True
        return masks


def axis_offsets(kernel_size: int, stride: int, slack: int) -> np.ndarray:
    """``R[a, c]`` is True iff 0-based taps ``a`` and ``c`` share a class
    along one axis: ``c - a`` is a non-negative multiple of ``stride`` not
    exceeding ``slack``.

    Classes are Cartesian products of one row set and one column set, so
    two of these matrices describe the whole family.
    """
    a = np.arange(kernel_size)[:, None]
    c = np.arange(kernel_size)[None, :]
    diff = c - a
    return (diff >= 0) & (diff <= slack) & (diff % stride == 0)


def _class_members(g: ConvGeometry, a: int, b: int) -> list[KernelIndex]:
    slack1, slack2 = g.slack
    rows = [c for c in range(a, g.k1 + 1, g.s1) if c - a <= slack1]
    cols = [d for d in range(b, g.k2 + 1, g.s2) if d - b <= slack2]
    return [KernelIndex(c, d) for c in rows for d in cols]


def index_classes(g: ConvGeometry, dedupe: bool = True) -> IndexClassFamily:
    """Enumerate the kernel index classes, one per anchor ``(a, b)``.

    Anchors are visited in lexicographic order. With ``dedupe`` (the default)
    a set already produced by an earlier anchor is skipped, so the family
    holds at most ``k1 * k2`` distinct classes and each class keeps its
    lexicographically smallest anchor.
    """
    seen = set()
    classes = []
    for a, b in itertools.product(range(1, g.k1 + 1), range(1, g.k2 + 1)):
        members = frozenset(_class_members(g, a, b))
        if dedupe and members in seen:
            continue
        seen.add(members)
        classes.append(IndexClass(KernelIndex(a, b), members))
    return IndexClassFamily(g, tuple(classes))
