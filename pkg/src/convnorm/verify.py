"""Randomized cross-checks of the closed-form norms against the oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .decay import NormKind, norm_subgradient
from .errors import GeometryError
from .geometry import ConvGeometry, check_assumption1, index_classes
from .norms import Kernel4D, frobenius_exact, l1_norm, l2_upper_bound, linf_norm
from .oracle import materialize, matrix_frobenius, matrix_l1, matrix_linf, power_iteration_l2

log = logging.getLogger(__name__)

REL_TOL = 1e-9
FROB_REL_TOL = 1e-12
BOUND_SLACK = 1e-6
FD_STEP = 1e-6
FD_TOL = 1e-4


def random_geometry(
    rng: np.random.Generator,
    max_channels: int = 4,
    max_kernel: int = 4,
    max_stride: int = 3,
    max_padding: int = 2,
    max_input: int = 12,
    max_entries: Optional[int] = None,
) -> ConvGeometry:
    """Draw geometries uniformly from the given ranges until one satisfies
    the kernel-placement assumption (and the entry cap, if given)."""
    while True:
        k1, k2 = (int(v) for v in rng.integers(1, max_kernel + 1, size=2))
        h_in = int(rng.integers(k1, max_input + 1))
        w_in = int(rng.integers(k2, max_input + 1))
        try:
            g = ConvGeometry(
                d_in=int(rng.integers(1, max_channels + 1)),
                d_out=int(rng.integers(1, max_channels + 1)),
                h_in=h_in,
                w_in=w_in,
                k1=k1,
                k2=k2,
                s1=int(rng.integers(1, max_stride + 1)),
                s2=int(rng.integers(1, max_stride + 1)),
                p1=int(rng.integers(0, max_padding + 1)),
                p2=int(rng.integers(0, max_padding + 1)),
            )
        except GeometryError:
            continue
        if not check_assumption1(g):
            continue
        rows, cols = g.matrix_shape
        if max_entries is not None and rows * cols > max_entries:
            continue
        return g


def random_kernel(rng: np.random.Generator, g: ConvGeometry) -> Kernel4D:
    return Kernel4D(g, rng.standard_normal(g.kernel_shape))


def finite_difference(fn: Callable[[Kernel4D], float], kernel: Kernel4D, step: float = FD_STEP) -> np.ndarray:
    """Central differences of ``fn`` w.r.t. every kernel entry."""
    base = kernel.data
    grad = np.empty_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (fn(kernel.with_data(plus)) - fn(kernel.with_data(minus))) / (2 * step)
    return grad


def has_unique_argmax(kernel: Kernel4D, kind: NormKind, margin: float = 1e-4) -> bool:
    """True when the maximizing set is unique by at least ``margin`` and none
    of its entries is within ``margin`` of zero, i.e. the norm is
    differentiable there and a finite difference is meaningful.

    Enumerates the index classes explicitly rather than reusing the fast
    path in :mod:`convnorm.norms`.
    """
    kind = NormKind(kind)
    A = np.abs(kernel.data)
    if kind is NormKind.LINF:
        sums = A.reshape(A.shape[0], -1).sum(axis=1)
        order = np.argsort(sums)[::-1]
        active = A[order[0]]
    else:
        masks = index_classes(kernel.geometry).as_masks()
        col_mass = A.sum(axis=0)  # (d_in, k1, k2)
        sums = np.einsum("jkt,ckt->jc", col_mass, masks).ravel()
        order = np.argsort(sums)[::-1]
        j, c = divmod(int(order[0]), masks.shape[0])
        active = A[:, j][:, masks[c]]
    if sums.size > 1 and sums[order[0]] - sums[order[1]] < margin:
        return False
    return bool(np.all(active > margin))


@dataclass
class VerifyReport:
    trials: int
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    skipped_subgradient: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures

    def count(self, name: str) -> None:
        self.checks[name] = self.checks.get(name, 0) + 1

    def fail(self, name: str, g: ConvGeometry, detail: str) -> None:
        self.failures.append({"check": name, "geometry": g, "detail": detail})


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300) if b else abs(a)


def run_verification(
    trials: int = 200,
    seed: int = 42,
    l1_fn: Callable[[Kernel4D], float] = l1_norm,
    linf_fn: Callable[[Kernel4D], float] = linf_norm,
    max_entries: Optional[int] = None,
    power_tol: float = 1e-10,
    power_max_iters: int = 10_000,
) -> VerifyReport:
    """Run ``trials`` random (geometry, kernel) checks.

    Each trial compares l1/linf with the dense matrix's column/row sums,
    the l2 bound with power iteration, the Frobenius formula with the
    matrix (unpadded layers only), and both subgradients with central
    finite differences where the norm is differentiable. ``l1_fn`` and
    ``linf_fn`` are injectable so a corrupted formula can be shown to fail.
    """
    rng = np.random.default_rng(seed)
    report = VerifyReport(trials)
    if trials == 0:
        log.warning("verify called with trials=0; nothing checked")
    for _ in range(trials):
        g = random_geometry(rng, max_entries=max_entries)
        kernel = random_kernel(rng, g)
        M = materialize(kernel)

        for name, fn, ref in (("l1", l1_fn, matrix_l1(M)), ("linf", linf_fn, matrix_linf(M))):
            got = fn(kernel)
            report.count(name)
            if _rel_err(got, ref) >= REL_TOL:
                report.fail(name, g, f"formula {got!r} != oracle {ref!r}")

        est = power_iteration_l2(kernel, max_iters=power_max_iters, tol=power_tol, seed=seed)
        bound = l2_upper_bound(kernel)
        report.count("l2_bound")
        if bound < est.sigma - BOUND_SLACK:
            report.fail("l2_bound", g, f"bound {bound!r} < power iteration {est.sigma!r}")

        if g.p1 == 0 and g.p2 == 0:
            report.count("frobenius")
            ref = matrix_frobenius(M)
            got = frobenius_exact(kernel)
            if _rel_err(got, ref) >= FROB_REL_TOL:
                report.fail("frobenius", g, f"formula {got!r} != oracle {ref!r}")

        for kind, fn in ((NormKind.L1, l1_fn), (NormKind.LINF, linf_fn)):
            if not has_unique_argmax(kernel, kind):
                report.skipped_subgradient += 1
                continue
            report.count(f"subgradient_{kind.value}")
            diff = np.abs(norm_subgradient(kernel, kind) - finite_difference(fn, kernel)).max()
            if diff > FD_TOL:
                report.fail(f"subgradient_{kind.value}", g, f"max deviation from finite difference {diff:.3g}")
    return report
