"""
Operator norms of a convolution, with and without its matrix
============================================================

A conv layer is a linear map, so it has a matrix. Forming that matrix
is expensive; the l1 and linf norms can be read off the kernel instead.
"""

import numpy as np

from convnorm import Kernel4D, l1_norm, linf_norm, l2_upper_bound, materialize, matrix_l1, matrix_linf

rng = np.random.default_rng(0)

# 4 output channels, 3 input channels, 3x3 taps, applied to a 10x10 image
# with stride 2 and one pixel of zero padding
K = Kernel4D.from_array(rng.standard_normal((4, 3, 3, 3)), 10, stride=2, padding=1)
print(K.geometry)

# brute force: build the whole (4*5*5) x (3*10*10) matrix
M = materialize(K)
print("matrix shape:", M.matrix.shape)
print("l1   from matrix:", matrix_l1(M), " from kernel:", l1_norm(K))
print("linf from matrix:", matrix_linf(M), " from kernel:", linf_norm(K))

# the l2 norm gets an upper bound only
print("l2 upper bound:", l2_upper_bound(K), " true:", np.linalg.norm(M.matrix, 2))
