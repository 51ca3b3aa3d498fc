"""
Which kernel taps share a column
================================

With stride s, a single input pixel is touched by a subset of the kernel
taps. Those subsets (index classes) are what the l1 norm maximizes over.
"""

import numpy as np

from convnorm import ConvGeometry, Kernel4D, index_classes, materialize

# 5x5 kernel, stride 2, padding 1, 7x7 input
g = ConvGeometry(d_in=1, d_out=1, h_in=7, w_in=7, k1=5, k2=5, s1=2, s2=2, p1=1, p2=1)
family = index_classes(g)
for cls in family:
    print(tuple(cls.anchor), sorted(tuple(m) for m in cls.members))

# the masks are handy for summing kernel magnitudes per class
masks = family.as_masks()
print(masks.shape, masks.sum(axis=(1, 2)))

# first row of the matrix of a 3x3 all-ones kernel on a 5x5 input:
# the nonzero columns trace out the top-left 3x3 window
K = Kernel4D.from_array(np.ones((1, 1, 3, 3)), 5)
print(np.flatnonzero(materialize(K).matrix[0]) + 1)
