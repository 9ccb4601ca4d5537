"""Group-wise spatial-spectral super-resolution for hyperspectral cubes.

The package bundles a small float64 autodiff engine, the grouped
branch/global reconstruction network built on it, image-quality metrics,
resampling and synthetic-data utilities, a trainer, and a command line
interface.  Everything runs on numpy; no deep-learning framework is
required.
"""

from .tensor import Tensor, ConvParams, no_grad

__version__ = "0.1.0"

__all__ = ["Tensor", "ConvParams", "no_grad", "__version__"]
