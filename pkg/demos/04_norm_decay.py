"""
Shrinking layer norms during training
=====================================

Norm decay adds a smoothed subgradient of each layer's l1 (or linf) norm
to the task gradient. Here the task gradient is zero, so only the
penalty acts.
"""

from convnorm import DecayConfig, NormKind, run_decay_demo
from convnorm.decay import make_toy_model

layers = make_toy_model(seed=0)
for kind in NormKind:
    trace = run_decay_demo(layers, DecayConfig(kind, beta=1.0, gamma=0.5, steps=200, step_size=1e-2))
    start, end = trace.norms[0], trace.norms[-1]
    for n, (a, b) in enumerate(zip(start, end)):
        print(f"{kind.value:4s} layer {n}: {a:.4f} -> {b:.4f}  ({b / a:.2f}x)")
