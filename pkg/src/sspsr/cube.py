"""Container for a hyperspectral image cube.

A cube is a stack of single-channel band images sharing one spatial grid,
stored band-major as a float64 array of shape ``[bands, height, width]``.
Reflectance-like data is expected to live in ``[0, 1]``, but the container
itself only enforces shape and finiteness so intermediate results (residuals,
unclipped network output) can ride in the same type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["HsiCube"]


@dataclass
class HsiCube:
    """A ``[bands, height, width]`` float64 hyperspectral cube."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"cube data must be 3-D [bands, height, width], got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError(f"cube must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cube data contains non-finite values")
        self.data = arr

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def copy(self) -> "HsiCube":
        return HsiCube(self.data.copy())

    def clipped(self, lo: float = 0.0, hi: float = 1.0) -> "HsiCube":
        """Return a copy with values clamped to ``[lo, hi]``."""
        return HsiCube(np.clip(self.data, lo, hi))

    def to_batch(self) -> Tensor:
        """View the cube as a single-item network batch ``[1, bands, H, W]``."""
        return Tensor(self.data[None])

    @classmethod
    def from_batch(cls, batch: Tensor | np.ndarray, index: int = 0) -> "HsiCube":
        """Extract one item of a ``[N, C, H, W]`` batch as a cube."""
        arr = batch.data if isinstance(batch, Tensor) else np.asarray(batch)
        if arr.ndim != 4:
            raise ValueError(f"batch must be 4-D [N, C, H, W], got shape {arr.shape}")
        return cls(arr[index].copy())
