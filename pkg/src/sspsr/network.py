"""The grouped branch/global super-resolution network.

The model splits a low-resolution cube into overlapping band groups, runs
each group through a branch network (shallow conv, block trunk, sub-pixel
upsampling, reconstruction conv back to the group's band count), merges the
branch outputs by overlap averaging, and refines the merged cube with a
global network of the same design.  A bicubic upsample of the input, passed
through its own shallow conv, joins the global features additively before
the final reconstruction conv — so the trunk only has to learn the residual
detail on top of plain interpolation.

Upsampling is progressive: the branches lift by a small factor and the
global net supplies the rest, each x2 stage being conv(n -> 4n), pixel
shuffle, ReLU.  Branches share one parameter set by default; sharing,
grouping, progressiveness, and the attention gate can each be switched off
independently to reproduce the reduced topologies used for ablation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blocks as B
from .grouping import GroupingScheme, merge_overlap_average, plan_groups, split
from .resample import bicubic_resize_array, resize_matrix
from .tensor import (
    ConvParams,
    Tensor,
    accumulate_grad,
    add,
    conv2d,
    custom_op,
    he_uniform_conv,
    pixel_shuffle,
    relu,
)

__all__ = [
    "NetworkConfig",
    "BranchParams",
    "GlobalParams",
    "SspsrParams",
    "init_params",
    "sspsr_forward",
    "named_parameters",
    "count_params",
    "forward_flops",
    "save_checkpoint",
    "load_checkpoint",
]

SCALES = (2, 4, 8)

CHECKPOINT_MAGIC = b"SSPW"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyper-parameters and ablation switches.

    ``branch_scale`` is normally derived — 2 for total scales 4 and 8, and 1
    for scale 2 or whenever progressive upsampling is off — but can be pinned
    explicitly to any power-of-two divisor of ``scale``.
    """

    bands: int
    scale: int
    group_size: int = 8
    overlap: int = 2
    n_feats: int = 256
    n_blocks: int = 3
    use_grouping: bool = True
    use_progressive: bool = True
    share_params: bool = True
    use_attention: bool = True
    conv_method: str = "im2col"
    attention_reduction: int = 16
    branch_scale: int | None = None

    def __post_init__(self) -> None:
        if self.bands < 1:
            raise ValueError(f"bands must be >= 1, got {self.bands}")
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}, got {self.scale}")
        if self.n_feats < 1 or self.n_blocks < 1:
            raise ValueError(
                f"n_feats and n_blocks must be >= 1, got {self.n_feats} and {self.n_blocks}"
            )
        bs = self.branch_scale
        if bs is None:
            bs = 1 if (not self.use_progressive or self.scale == 2) else 2
            object.__setattr__(self, "branch_scale", bs)
        if not self.use_progressive and bs != 1:
            raise ValueError("branch_scale must be 1 when use_progressive is off")
        if bs < 1 or self.scale % bs != 0 or (bs & (bs - 1)) != 0:
            raise ValueError(
                f"branch_scale must be a power-of-two divisor of scale, got "
                f"{bs} for scale {self.scale}"
            )

    @property
    def global_scale(self) -> int:
        return self.scale // self.branch_scale

    def grouping_scheme(self) -> GroupingScheme:
        """The band grouping in effect (a single full-width group when ablated)."""
        if not self.use_grouping:
            return plan_groups(self.bands, self.bands, 0)
        return plan_groups(self.bands, self.group_size, self.overlap)


@dataclass
class BranchParams:
    """One branch network: shallow conv, trunk, upsample stages, reconstruction conv."""

    shallow: ConvParams
    sspn: B.SspnParams
    upsample: list[ConvParams]
    rec: ConvParams


@dataclass
class GlobalParams:
    """The global network plus the shallow conv on the interpolated input."""

    shallow: ConvParams
    sspn: B.SspnParams
    upsample: list[ConvParams]
    residual_shallow: ConvParams
    rec: ConvParams


@dataclass
class SspsrParams:
    """All model weights.

    ``branches`` holds a single entry when parameters are shared — every
    group is evaluated against that one storage — or one entry per group
    otherwise.
    """

    branches: list[BranchParams]
    global_net: GlobalParams
    shared: bool

    def branch_for(self, group_index: int) -> BranchParams:
        if self.shared:
            return self.branches[0]
        return self.branches[group_index]


def _upsample_factors(total: int, progressive: bool) -> list[int]:
    """Per-stage shuffle factors: stacked x2 stages, or one direct stage."""
    if total == 1:
        return []
    if not progressive:
        return [total]
    return [2] * (total.bit_length() - 1)  # total is a validated power of two


def _init_branch(cfg: NetworkConfig, group_bands: int, rng: np.random.Generator) -> BranchParams:
    nf = cfg.n_feats
    return BranchParams(
        shallow=he_uniform_conv(nf, group_bands, 3, rng),
        sspn=B.init_sspn_params(cfg.n_blocks, nf, rng, cfg.use_attention, cfg.attention_reduction),
        upsample=[
            he_uniform_conv(r * r * nf, nf, 3, rng)
            for r in _upsample_factors(cfg.branch_scale, cfg.use_progressive)
        ],
        rec=he_uniform_conv(group_bands, nf, 3, rng),
    )


def init_params(cfg: NetworkConfig, seed: int) -> SspsrParams:
    """Initialise all weights from one seeded generator (deterministic)."""
    rng = np.random.default_rng(seed)
    scheme = cfg.grouping_scheme()
    group_bands = scheme.intervals[0][1] - scheme.intervals[0][0]
    n_copies = 1 if cfg.share_params else scheme.group_count
    branches = [_init_branch(cfg, group_bands, rng) for _ in range(n_copies)]
    nf = cfg.n_feats
    global_net = GlobalParams(
        shallow=he_uniform_conv(nf, cfg.bands, 3, rng),
        sspn=B.init_sspn_params(cfg.n_blocks, nf, rng, cfg.use_attention, cfg.attention_reduction),
        upsample=[
            he_uniform_conv(r * r * nf, nf, 3, rng)
            for r in _upsample_factors(cfg.global_scale, cfg.use_progressive)
        ],
        residual_shallow=he_uniform_conv(nf, cfg.bands, 3, rng),
        rec=he_uniform_conv(cfg.bands, nf, 3, rng),
    )
    return SspsrParams(branches=branches, global_net=global_net, shared=cfg.share_params)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def _upsample_chain(f: Tensor, stages: list[ConvParams], method: str) -> Tensor:
    for conv in stages:
        # Each stage expands channels by r^2 for an r-fold shuffle; r is
        # recoverable from the conv's own channel ratio.
        r = math.isqrt(conv.weight.shape[0] // f.shape[1])
        f = relu(pixel_shuffle(conv2d(f, conv, method=method), r))
    return f


def _branch_forward(part: Tensor, bp: BranchParams, method: str) -> Tensor:
    f = conv2d(part, bp.shallow, method=method)
    f = B.sspn_forward(f, bp.sspn, method=method)
    f = _upsample_chain(f, bp.upsample, method)
    return conv2d(f, bp.rec, method=method)


def sspsr_forward(x: Tensor, params: SspsrParams, cfg: NetworkConfig) -> Tensor:
    """Super-resolve a ``[N, C, h, w]`` batch to ``[N, C, scale*h, scale*w]``.

    Branches run in ascending group order; with shared parameters they all
    read the same storage, so gradient contributions accumulate there in
    that fixed order.
    """
    if x.ndim != 4:
        raise ValueError(f"input must be 4-D [N, C, h, w], got shape {x.shape}")
    if x.shape[1] != cfg.bands:
        raise ValueError(
            f"input has {x.shape[1]} bands but the model is configured for {cfg.bands}"
        )
    method = cfg.conv_method
    scheme = cfg.grouping_scheme()
    if not params.shared and len(params.branches) != scheme.group_count:
        raise ValueError(
            f"unshared model stores {len(params.branches)} branches but the "
            f"grouping yields {scheme.group_count}"
        )

    parts = split(x, scheme)
    branch_outs = [
        _branch_forward(part, params.branch_for(i), method) for i, part in enumerate(parts)
    ]
    merged = merge_overlap_average(branch_outs, scheme)

    g = conv2d(merged, params.global_net.shallow, method=method)
    g = B.sspn_forward(g, params.global_net.sspn, method=method)
    g = _upsample_chain(g, params.global_net.upsample, method)

    interpolated = _bicubic_up(x, cfg.scale)
    g = add(g, conv2d(interpolated, params.global_net.residual_shallow, method=method))
    return conv2d(g, params.global_net.rec, method=method)


def _bicubic_up(x: Tensor, factor: int) -> Tensor:
    """Bicubic upsample as a graph node.

    The resize is linear in the input, so the backward pass applies the
    transposed per-axis weight matrices to the output gradient.
    """
    out = bicubic_resize_array(x.data, factor, "up")
    rows = resize_matrix(x.shape[-2], factor, "up")
    cols = resize_matrix(x.shape[-1], factor, "up")

    def backward_fn(grad: np.ndarray) -> None:
        g = np.einsum("ij,...jk->...ik", rows.T, grad)
        accumulate_grad(x, np.einsum("...ij,kj->...ik", g, cols.T))

    return custom_op(out, "bicubic_up", (x,), backward_fn)


# ---------------------------------------------------------------------------
# Parameter enumeration, counting, and FLOPs
# ---------------------------------------------------------------------------


def _named_conv(prefix: str, conv: ConvParams):
    yield f"{prefix}.weight", conv.weight
    yield f"{prefix}.bias", conv.bias


def _named_sspn(prefix: str, trunk: B.SspnParams):
    for r, block in enumerate(trunk.blocks):
        base = f"{prefix}.{r}"
        yield from _named_conv(f"{base}.spatial_conv1", block.spatial_conv1)
        yield from _named_conv(f"{base}.spatial_conv2", block.spatial_conv2)
        yield from _named_conv(f"{base}.spectral_conv1", block.spectral_conv1)
        yield from _named_conv(f"{base}.spectral_conv2", block.spectral_conv2)
        if block.attention is not None:
            att = block.attention
            yield f"{base}.attention.fc1.weight", att.fc1_weight
            yield f"{base}.attention.fc1.bias", att.fc1_bias
            yield f"{base}.attention.fc2.weight", att.fc2_weight
            yield f"{base}.attention.fc2.bias", att.fc2_bias


def named_parameters(params: SspsrParams):
    """Yield ``(name, tensor)`` for every unique parameter, in a fixed order."""
    for i, bp in enumerate(params.branches):
        base = f"branch.{i}"
        yield from _named_conv(f"{base}.shallow", bp.shallow)
        yield from _named_sspn(f"{base}.sspn", bp.sspn)
        for s, conv in enumerate(bp.upsample):
            yield from _named_conv(f"{base}.upsample.{s}", conv)
        yield from _named_conv(f"{base}.rec", bp.rec)
    g = params.global_net
    yield from _named_conv("global.shallow", g.shallow)
    yield from _named_sspn("global.sspn", g.sspn)
    for s, conv in enumerate(g.upsample):
        yield from _named_conv(f"global.upsample.{s}", conv)
    yield from _named_conv("global.residual_shallow", g.residual_shallow)
    yield from _named_conv("global.rec", g.rec)


def count_params(params: SspsrParams) -> int:
    """Total scalar count over unique parameter storage (shared counted once)."""
    return sum(t.size for _, t in named_parameters(params))


def forward_flops(cfg: NetworkConfig, input_shape: tuple[int, int, int, int]) -> int:
    """Analytic multiply-accumulate count of one forward pass.

    Counts convolution MACs (``N * C_out * H' * W' * C_in * kh * kw``) and
    the attention bottleneck's fully connected MACs; element-wise work,
    pooling, and the bicubic interpolation are not counted.
    """
    n, c, h, w = input_shape
    if c != cfg.bands:
        raise ValueError(f"input has {c} bands but the model is configured for {cfg.bands}")
    scheme = cfg.grouping_scheme()
    group_bands = scheme.intervals[0][1] - scheme.intervals[0][0]
    nf = cfg.n_feats
    hidden = max(1, nf // cfg.attention_reduction)

    def conv_macs(c_out: int, c_in: int, k: int, hh: int, ww: int) -> int:
        return n * c_out * c_in * k * k * hh * ww

    def trunk_macs(hh: int, ww: int) -> int:
        per_block = 2 * conv_macs(nf, nf, 3, hh, ww) + 2 * conv_macs(nf, nf, 1, hh, ww)
        if cfg.use_attention:
            per_block += n * (hidden * nf + nf * hidden)
        return cfg.n_blocks * per_block

    # One branch, tracked at its running resolution.
    hh, ww = h, w
    branch = conv_macs(nf, group_bands, 3, hh, ww) + trunk_macs(hh, ww)
    for r in _upsample_factors(cfg.branch_scale, cfg.use_progressive):
        branch += conv_macs(r * r * nf, nf, 3, hh, ww)
        hh, ww = r * hh, r * ww
    branch += conv_macs(group_bands, nf, 3, hh, ww)
    total = scheme.group_count * branch

    # Global net continues from the branch output resolution.
    total += conv_macs(nf, cfg.bands, 3, hh, ww) + trunk_macs(hh, ww)
    for r in _upsample_factors(cfg.global_scale, cfg.use_progressive):
        total += conv_macs(r * r * nf, nf, 3, hh, ww)
        hh, ww = r * hh, r * ww
    total += conv_macs(nf, cfg.bands, 3, hh, ww)  # shallow conv on the interpolated input
    total += conv_macs(cfg.bands, nf, 3, hh, ww)
    return total


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = (
    "bands",
    "scale",
    "group_size",
    "overlap",
    "n_feats",
    "n_blocks",
    "use_grouping",
    "use_progressive",
    "share_params",
    "use_attention",
    "conv_method",
    "attention_reduction",
    "branch_scale",
)


def _encode_config(cfg: NetworkConfig) -> bytes:
    lines = []
    for name in _CONFIG_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{name}={value}")
    return "\n".join(lines).encode("utf-8")


def _decode_config(blob: bytes) -> NetworkConfig:
    values: dict[str, object] = {}
    for line in blob.decode("utf-8").splitlines():
        name, _, raw = line.partition("=")
        if name not in _CONFIG_FIELDS:
            raise ValueError(f"checkpoint config has unknown field {name!r}")
        if raw in ("true", "false"):
            values[name] = raw == "true"
        elif name == "conv_method":
            values[name] = raw
        else:
            values[name] = int(raw)
    missing = [f for f in _CONFIG_FIELDS if f not in values]
    if missing:
        raise ValueError(f"checkpoint config is missing fields: {missing}")
    return NetworkConfig(**values)


def save_checkpoint(path: str | Path, cfg: NetworkConfig, params: SspsrParams) -> None:
    """Write config and all weights; float64 values survive bit-exactly."""
    out = [struct.pack("<4sI", CHECKPOINT_MAGIC, CHECKPOINT_VERSION)]
    config_blob = _encode_config(cfg)
    out.append(struct.pack("<I", len(config_blob)))
    out.append(config_blob)
    entries = list(named_parameters(params))
    out.append(struct.pack("<I", len(entries)))
    for name, tensor in entries:
        name_bytes = name.encode("utf-8")
        out.append(struct.pack("<I", len(name_bytes)))
        out.append(name_bytes)
        out.append(struct.pack("<I", tensor.ndim))
        out.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        out.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path: str | Path) -> tuple[NetworkConfig, SspsrParams]:
    """Read a checkpoint back into a config and freshly built parameters."""
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(raw):
            raise ValueError(f"{path}: truncated checkpoint at byte {offset}")
        chunk = view[offset : offset + n]
        offset += n
        return chunk

    magic, version = struct.unpack("<4sI", take(8))
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {bytes(magic)!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (config_len,) = struct.unpack("<I", take(4))
    cfg = _decode_config(bytes(take(config_len)))
    params = init_params(cfg, seed=0)
    expected = dict(named_parameters(params))

    (count,) = struct.unpack("<I", take(4))
    seen: set[str] = set()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        if name not in expected:
            raise ValueError(f"{path}: unexpected parameter {name!r}")
        if name in seen:
            raise ValueError(f"{path}: duplicate parameter {name!r}")
        seen.add(name)
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        tensor = expected[name]
        if shape != tensor.shape:
            raise ValueError(
                f"{path}: parameter {name!r} has shape {shape}, model expects {tensor.shape}"
            )
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape)
        tensor.data = values.astype(np.float64)
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after last parameter")
    missing = sorted(set(expected) - seen)
    if missing:
        raise ValueError(f"{path}: checkpoint is missing parameters: {missing[:5]}")
    return cfg, params
