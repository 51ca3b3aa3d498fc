"""
Saving a model and reading its norms from the command line
==========================================================

Writes a small manifest plus binary tensors, loads it back, and runs the
`convnorm norms` command on it.
"""

import tempfile
from pathlib import Path

import numpy as np

from convnorm import Kernel4D
from convnorm.cli import main
from convnorm.io import BatchNormLayer, Conv2dLayer, DenseLayer, load_model, save_model

rng = np.random.default_rng(0)
layers = [
    Conv2dLayer("conv1", Kernel4D.from_array(rng.standard_normal((8, 3, 3, 3)), 16, 1, 1)),
    BatchNormLayer("bn1", rng.standard_normal(8), rng.random(8) + 0.5),
    Conv2dLayer("conv2", Kernel4D.from_array(rng.standard_normal((8, 8, 3, 3)), 16, 2, 1)),
    DenseLayer("fc", rng.standard_normal((10, 8 * 8 * 8)) * 0.05),
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.json"
    save_model(path, layers)
    print(path.read_text())
    print([type(l).__name__ for l in load_model(path)])
    main(["norms", str(path)])
    main(["decay-demo", str(path), "--steps", "50"])
