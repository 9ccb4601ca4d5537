"""Training objectives: L1 reconstruction plus spatial-spectral smoothness.

``total = l1 + alpha * sstv``.  The L1 term is the mean absolute difference
over every voxel.  The smoothness term penalises the L1 norm of forward
differences along height, width, and the band axis (no wrap-around), which
discourages spatial speckle and spectral zig-zag in the reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tensor import Tensor, absolute, add, mean_all, scale, sum_all

__all__ = ["LossConfig", "l1_loss", "sstv_loss", "total_loss"]


@dataclass(frozen=True)
class LossConfig:
    """Loss weighting; ``alpha`` scales the smoothness term."""

    alpha: float = 1e-3

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference over all elements (scalar tensor)."""
    if pred.shape != target.shape:
        raise ValueError(
            f"l1_loss shapes must match, got {pred.shape} and {target.shape}"
        )
    return mean_all(absolute(pred - target))


def sstv_loss(pred: Tensor, per_site: bool = True) -> Tensor:
    """Total variation along height, width, and band of a ``[N,C,H,W]`` batch.

    Each axis contributes the absolute forward differences at its interior
    sites; an axis of extent 1 contributes nothing.  With ``per_site`` (the
    default) every axis term is the *mean* over its difference sites, which
    keeps the magnitude comparable across cube sizes; otherwise the raw sums
    are divided only by the batch size.
    """
    if pred.ndim != 4:
        raise ValueError(f"sstv_loss input must be 4-D [N,C,H,W], got shape {pred.shape}")
    n = pred.shape[0]
    terms = []
    for axis in (2, 3, 1):  # height, width, band
        if pred.shape[axis] < 2:
            continue
        lead = [slice(None)] * 4
        lag = [slice(None)] * 4
        lead[axis] = slice(1, None)
        lag[axis] = slice(None, -1)
        diff = absolute(pred[tuple(lead)] - pred[tuple(lag)])
        terms.append(mean_all(diff) if per_site else scale(sum_all(diff), 1.0 / n))
    if not terms:
        return scale(sum_all(pred), 0.0)
    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    return total


def total_loss(pred: Tensor, target: Tensor, cfg: LossConfig = LossConfig()) -> Tensor:
    """Weighted objective ``l1 + alpha * sstv``.

    ``alpha = 0`` short-circuits to the bare L1 term, bit for bit.
    """
    l1 = l1_loss(pred, target)
    if cfg.alpha == 0.0:
        return l1
    return add(l1, scale(sstv_loss(pred), cfg.alpha))
