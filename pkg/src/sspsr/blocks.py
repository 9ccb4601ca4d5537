"""Spatial-spectral residual blocks.

The core unit stacks two residual sub-modules:

* a **spatial module** — two 3x3 convolutions with a ReLU between, added
  back onto the input (classic residual conv pair for spatial texture);
* a **spectral module** — two 1x1 convolutions with a ReLU between (pure
  per-pixel band mixing, no spatial receptive field), optionally rescaled
  per channel by a squeeze-and-excite style attention gate, then added onto
  the spatial module's output.

The attention gate pools the spectral body's output to one value per
channel, pushes it through a two-layer bottleneck (reduction 16), and maps
it to ``(0, 1)`` with a sigmoid; the body is multiplied by the resulting
``[N, C, 1, 1]`` vector before the residual addition.

A chain of these blocks plus a long skip connection forms the feature
extraction trunk used by both the per-group branches and the global fusion
net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    ConvParams,
    Tensor,
    add,
    conv2d,
    fully_connected,
    global_avg_pool,
    he_uniform_conv,
    he_uniform_linear,
    mul,
    relu,
    reshape,
    sigmoid,
)

__all__ = [
    "AttentionParams",
    "SsbParams",
    "SspnParams",
    "init_attention_params",
    "init_ssb_params",
    "init_sspn_params",
    "spatial_residual",
    "spectral_attention",
    "ssb_forward",
    "sspn_forward",
]

ATTENTION_REDUCTION = 16


@dataclass
class AttentionParams:
    """Bottleneck weights of the per-channel attention gate."""

    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor


@dataclass
class SsbParams:
    """Weights of one spatial-spectral block.

    ``attention`` is ``None`` when the channel-attention gate is ablated;
    the spectral body then feeds the residual addition unscaled.
    """

    spatial_conv1: ConvParams
    spatial_conv2: ConvParams
    spectral_conv1: ConvParams
    spectral_conv2: ConvParams
    attention: AttentionParams | None


@dataclass
class SspnParams:
    """A stack of spatial-spectral blocks sharing one feature width."""

    blocks: list[SsbParams]


def init_attention_params(
    n_feats: int, rng: np.random.Generator, reduction: int = ATTENTION_REDUCTION
) -> AttentionParams:
    """Initialise the attention bottleneck (hidden width ``n_feats / reduction``)."""
    hidden = max(1, n_feats // reduction)
    fc1_w, fc1_b = he_uniform_linear(hidden, n_feats, rng)
    fc2_w, fc2_b = he_uniform_linear(n_feats, hidden, rng)
    return AttentionParams(fc1_weight=fc1_w, fc1_bias=fc1_b, fc2_weight=fc2_w, fc2_bias=fc2_b)


def init_ssb_params(
    n_feats: int,
    rng: np.random.Generator,
    use_attention: bool = True,
    reduction: int = ATTENTION_REDUCTION,
) -> SsbParams:
    """Initialise one block's convolutions (and gate, unless ablated)."""
    return SsbParams(
        spatial_conv1=he_uniform_conv(n_feats, n_feats, 3, rng),
        spatial_conv2=he_uniform_conv(n_feats, n_feats, 3, rng),
        spectral_conv1=he_uniform_conv(n_feats, n_feats, 1, rng),
        spectral_conv2=he_uniform_conv(n_feats, n_feats, 1, rng),
        attention=init_attention_params(n_feats, rng, reduction) if use_attention else None,
    )


def init_sspn_params(
    n_blocks: int,
    n_feats: int,
    rng: np.random.Generator,
    use_attention: bool = True,
    reduction: int = ATTENTION_REDUCTION,
) -> SspnParams:
    """Initialise a trunk of ``n_blocks`` blocks."""
    if n_blocks < 1:
        raise ValueError(f"trunk needs at least one block, got {n_blocks}")
    return SspnParams(
        blocks=[init_ssb_params(n_feats, rng, use_attention, reduction) for _ in range(n_blocks)]
    )


def spatial_residual(f: Tensor, params: SsbParams, method: str = "im2col") -> Tensor:
    """Spatial sub-module: ``f + conv3x3(relu(conv3x3(f)))``."""
    body = conv2d(relu(conv2d(f, params.spatial_conv1, method=method)), params.spatial_conv2,
                  method=method)
    return add(f, body)


def spectral_attention(f: Tensor, params: AttentionParams) -> Tensor:
    """Channel gate of ``f``: pooled statistics -> bottleneck -> sigmoid.

    Returns a ``[N, C, 1, 1]`` tensor of per-channel scales in ``(0, 1)``.
    """
    n, c = f.shape[0], f.shape[1]
    pooled = reshape(global_avg_pool(f), (n, c))
    squeezed = relu(fully_connected(pooled, params.fc1_weight, params.fc1_bias))
    gate = sigmoid(fully_connected(squeezed, params.fc2_weight, params.fc2_bias))
    return reshape(gate, (n, c, 1, 1))


def ssb_forward(f: Tensor, params: SsbParams, method: str = "im2col") -> Tensor:
    """One spatial-spectral block.

    The spectral body is ``conv1x1(relu(conv1x1(.)))`` applied to the spatial
    module's output; with attention enabled the body is rescaled per channel
    by the gate computed from its own pooled statistics before the residual
    addition.
    """
    f_spatial = spatial_residual(f, params, method=method)
    body = conv2d(
        relu(conv2d(f_spatial, params.spectral_conv1, method=method)),
        params.spectral_conv2,
        method=method,
    )
    if params.attention is not None:
        body = mul(body, spectral_attention(body, params.attention))
    return add(f_spatial, body)


def sspn_forward(f0: Tensor, params: SspnParams, method: str = "im2col") -> Tensor:
    """Run the block stack and add the long skip from the trunk input.

    With every weight at zero each block is the identity, so the trunk
    degenerates to ``f0 + f0``.
    """
    f = f0
    for block in params.blocks:
        f = ssb_forward(f, block, method=method)
    return add(f, f0)
