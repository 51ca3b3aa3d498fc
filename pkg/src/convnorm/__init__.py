"""Exact l1/linf operator norms of 2D convolutional layers, a dense-matrix
oracle to check them, and norm-decay regularization."""

from .decay import (
    DecayConfig,
    DecayState,
    MomentumSGD,
    NormKind,
    decay_step,
    dense_subgradient,
    norm_subgradient,
    run_decay_demo,
)
from .errors import *  # noqa: F401,F403
from .geometry import ConvGeometry, IndexClassFamily, KernelIndex, check_assumption1, index_classes, output_dims
from .norms import (
    Kernel4D,
    NormReport,
    bn_norm,
    dense_norms,
    frobenius_exact,
    l1_norm,
    l2_upper_bound,
    linf_norm,
    norm_report,
)
from .oracle import (
    LinearMap,
    ZeroLipschitzNet,
    build_zero_lipschitz_net,
    conv_adjoint,
    conv_forward,
    materialize,
    matrix_frobenius,
    matrix_l1,
    matrix_linf,
    power_iteration_l2,
)

__version__ = "0.1.0"
