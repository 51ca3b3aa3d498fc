"""
Spectral norm by power iteration
================================

Alternate the convolution and its adjoint to estimate the largest
singular value, then compare with the closed-form upper bound.
"""

import numpy as np

from convnorm import Kernel4D, frobenius_exact, l2_upper_bound, materialize, power_iteration_l2
from convnorm.oracle import dense_spectral_norm

rng = np.random.default_rng(1)
K = Kernel4D.from_array(rng.standard_normal((2, 2, 3, 3)), 6)

est = power_iteration_l2(K, max_iters=10_000, tol=1e-10, seed=0)
print(f"power iteration: {est.sigma:.10f} after {est.n_iter} steps (converged={est.converged})")
print(f"dense SVD:       {dense_spectral_norm(materialize(K)):.10f}")

# without padding the bound is exactly the Frobenius norm of the matrix
print("bound:", l2_upper_bound(K), " Frobenius:", frobenius_exact(K))

# a fixed budget is what the benchmark uses
print(power_iteration_l2(K, max_iters=20, tol=0.0))
