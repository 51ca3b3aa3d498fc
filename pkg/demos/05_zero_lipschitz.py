"""
Huge layer norms, zero Lipschitz constant
=========================================

Product-of-layer-norm bounds can be arbitrarily loose. Two ReLU layers
with complementary diagonal supports kill every input, no matter how big
the weights are.
"""

import numpy as np

from convnorm import build_zero_lipschitz_net

net = build_zero_lipschitz_net([8, 8, 8], magnitude=1e6, seed=0)
print("layer linf norms:", net.layer_norms())
print("product bound:   ", np.prod(net.layer_norms()))

rng = np.random.default_rng(0)
x1, x2 = rng.standard_normal((2, 1000, 8))
print("max |f(x)|:", np.abs(net.forward(x1)).max())
print("empirical Lipschitz:", net.empirical_lipschitz(x1, x2))
