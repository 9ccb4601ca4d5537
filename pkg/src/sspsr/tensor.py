"""Reverse-mode automatic differentiation on float64 numpy arrays.

The engine is deliberately small: a :class:`Tensor` wraps an ndarray, every
differentiable operation records a graph node holding its parents and a
backward closure, and :func:`backward` replays the recorded graph in reverse
topological order.  Only the operations needed by the super-resolution
network are provided (2-D convolution, element-wise arithmetic, activations,
pooling, pixel shuffling, slicing, reductions, a fully connected layer).

Conventions
-----------
* All data is ``float64``.  Inputs are converted and copied on construction,
  so a ``Tensor`` never aliases caller memory.
* Image batches are laid out ``[N, C, H, W]``.
* ``backward`` overwrites ``.grad`` on every tensor it reaches; gradients are
  never accumulated across separate calls.
* Graph traversal is deterministic: parents are stored in tuples and visited
  in a fixed order, so repeated runs produce bit-identical gradients.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ConvParams",
    "no_grad",
    "is_grad_enabled",
    "conv2d",
    "relu",
    "sigmoid",
    "activation",
    "global_avg_pool",
    "pixel_shuffle",
    "pixel_unshuffle",
    "add",
    "mul",
    "combine",
    "concat_channels",
    "fully_connected",
    "absolute",
    "sum_all",
    "mean_all",
    "scale",
    "reshape",
    "backward",
    "custom_op",
    "he_uniform_conv",
    "he_uniform_linear",
]

CONV_METHODS = ("im2col", "direct")

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Context manager that suspends graph recording.

    Operations executed inside the block produce plain value tensors with no
    parents, which keeps evaluation and finite-difference probing off the
    autodiff book-keeping entirely.
    """
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    """Return whether operations currently record graph nodes."""
    return _grad_enabled


class _GradNode:
    """Book-keeping for one recorded operation.

    ``parents`` is an ordered tuple of input tensors and ``backward_fn``
    accumulates the operation's vector-Jacobian product into their ``.grad``
    buffers when handed the output gradient.
    """

    __slots__ = ("op", "parents", "backward_fn")

    def __init__(
        self,
        op: str,
        parents: tuple["Tensor", ...],
        backward_fn: Callable[[np.ndarray], None],
    ) -> None:
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn


class Tensor:
    """A float64 array plus the graph metadata needed for backpropagation.

    Parameters
    ----------
    data : array-like
        Converted to ``float64`` and copied; every element must be finite.
    requires_grad : bool
        Marks the tensor as a gradient target (trainable parameter).  Op
        outputs inherit the flag from their inputs.
    """

    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False) -> None:
        arr = np.array(data, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor data contains non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: _GradNode | None = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(
        data: np.ndarray,
        op: str,
        parents: tuple["Tensor", ...],
        backward_fn: Callable[[np.ndarray], None],
    ) -> "Tensor":
        """Wrap an op result without re-copying, recording the node if needed."""
        if not np.all(np.isfinite(data)):
            raise ValueError(f"operation '{op}' produced non-finite values")
        out = Tensor.__new__(Tensor)
        out.data = np.ascontiguousarray(data, dtype=np.float64)
        out.grad = None
        out.node = None
        out.requires_grad = False
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.node = _GradNode(op, parents, backward_fn)
        return out

    # -- basic protocol -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a detached copy of the values."""
        return self.data.copy()

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        op = f", op={self.node.op!r}" if self.node is not None else ""
        return f"Tensor(shape={self.shape}{flag}{op})"

    # -- operator sugar -------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __getitem__(self, key) -> "Tensor":
        return _slice(self, key)

    def backward(self) -> None:
        backward(self)


def _accumulate(parent: Tensor, contribution: np.ndarray) -> None:
    """Add a gradient contribution into ``parent.grad`` (allocating if unset)."""
    if not parent.requires_grad:
        return
    if parent.grad is None:
        parent.grad = np.zeros_like(parent.data)
    parent.grad += contribution


def custom_op(
    data: np.ndarray,
    op: str,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], None],
) -> Tensor:
    """Wrap an externally computed forward result as a differentiable node.

    ``backward_fn`` receives the output gradient and must route contributions
    to the parents via :func:`accumulate_grad`.  This is the extension point
    used by composite operations (e.g. overlap-averaged group merging) whose
    forward pass is cheaper to compute directly in numpy.
    """
    return Tensor._from_op(np.asarray(data, dtype=np.float64), op, tuple(parents), backward_fn)


def accumulate_grad(parent: Tensor, contribution: np.ndarray) -> None:
    """Public accumulation hook for :func:`custom_op` backward closures."""
    _accumulate(parent, contribution)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Backpropagate from a scalar tensor through the recorded graph.

    Every tensor reachable from ``loss`` has its ``.grad`` reset first, so a
    call always yields the gradients of this loss alone.  The topological
    order is built iteratively (no recursion limit concerns for deep
    networks) and deterministically from the stored parent tuples.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() requires a scalar loss, got shape {loss.shape}")

    # Iterative post-order DFS: children enter the ordering before parents.
    ordered: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            ordered.append(tensor)
            continue
        if id(tensor) in seen:
            continue
        seen.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in reversed(tensor.node.parents):
                if id(parent) not in seen:
                    stack.append((parent, False))

    for tensor in ordered:
        tensor.grad = None
    loss.grad = np.ones_like(loss.data)

    for tensor in reversed(ordered):
        if tensor.node is not None and tensor.grad is not None:
            tensor.node.backward_fn(tensor.grad)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


@dataclass
class ConvParams:
    """Weights of one 2-D convolution layer.

    ``weight`` has shape ``[C_out, C_in, kh, kw]`` with square 1x1 or 3x3
    kernels; ``bias`` has shape ``[C_out]``.
    """

    weight: Tensor
    bias: Tensor

    def __post_init__(self) -> None:
        w, b = self.weight, self.bias
        if w.ndim != 4:
            raise ValueError(f"conv weight must be 4-D [C_out, C_in, kh, kw], got shape {w.shape}")
        c_out, _, kh, kw = w.shape
        if kh != kw or kh not in (1, 3):
            raise ValueError(f"conv kernels must be square 1x1 or 3x3, got {kh}x{kw}")
        if b.ndim != 1 or b.shape[0] != c_out:
            raise ValueError(
                f"conv bias must be 1-D of length {c_out} (the output channels), got shape {b.shape}"
            )

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]


def conv2d(
    x: Tensor,
    params: ConvParams,
    padding: int | None = None,
    method: str = "im2col",
) -> Tensor:
    """Stride-1 2-D convolution with zero padding.

    ``padding=None`` selects ``kernel_size // 2`` so 1x1 and 3x3 kernels both
    preserve the spatial extent.  Two forward implementations are available:

    * ``"im2col"`` unrolls input patches into a ``[N, C_in*kh*kw, H*W]``
      matrix and applies one batched matmul;
    * ``"direct"`` accumulates per-offset products, one tensor contraction
      for each of the ``kh*kw`` kernel taps.

    Both compute the same sums in different association orders; results agree
    to float64 rounding and either may be gradient-checked.
    """
    if method not in CONV_METHODS:
        raise ValueError(f"unknown conv2d method {method!r}, expected one of {CONV_METHODS}")
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be 4-D [N, C, H, W], got shape {x.shape}")
    w, b = params.weight, params.bias
    k = params.kernel_size
    if padding is None:
        padding = k // 2
    if padding not in (0, 1):
        raise ValueError(f"conv2d supports padding 0 or 1, got {padding}")
    n, c_in, h, wdt = x.shape
    if c_in != params.in_channels:
        raise ValueError(
            f"conv2d channel mismatch: input has {c_in} channels but weight expects "
            f"{params.in_channels} (input {x.shape}, weight {w.shape})"
        )
    h_out = h + 2 * padding - k + 1
    w_out = wdt + 2 * padding - k + 1
    if h_out <= 0 or w_out <= 0:
        raise ValueError(
            f"conv2d output extent would be {h_out}x{w_out} for input {h}x{wdt} "
            f"with kernel {k} and padding {padding}"
        )

    if padding > 0:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data

    if method == "im2col":
        # [N, C, h_out, w_out, k, k] -> [N, C*k*k, h_out*w_out]
        windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
        cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c_in * k * k, h_out * w_out)
        w_flat = w.data.reshape(params.out_channels, c_in * k * k)
        out = np.matmul(w_flat, cols).reshape(n, params.out_channels, h_out, w_out)
        out += b.data[None, :, None, None]
    else:
        out = np.zeros((n, params.out_channels, h_out, w_out))
        for i in range(k):
            for j in range(k):
                patch = xp[:, :, i : i + h_out, j : j + w_out]
                out += np.einsum("nchw,oc->nohw", patch, w.data[:, :, i, j])
        out += b.data[None, :, None, None]

    def backward_fn(g: np.ndarray) -> None:
        g_pad = np.zeros_like(xp) if x.requires_grad else None
        if w.requires_grad:
            grad_w = np.empty_like(w.data)
        for i in range(k):
            for j in range(k):
                patch = xp[:, :, i : i + h_out, j : j + w_out]
                if w.requires_grad:
                    grad_w[:, :, i, j] = np.einsum("nohw,nchw->oc", g, patch)
                if g_pad is not None:
                    g_pad[:, :, i : i + h_out, j : j + w_out] += np.einsum(
                        "nohw,oc->nchw", g, w.data[:, :, i, j]
                    )
        if w.requires_grad:
            _accumulate(w, grad_w)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 2, 3)))
        if g_pad is not None:
            if padding > 0:
                _accumulate(x, g_pad[:, :, padding:-padding, padding:-padding])
            else:
                _accumulate(x, g_pad)

    return Tensor._from_op(out, f"conv2d[{k}x{k},{method}]", (x, w, b), backward_fn)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    """Element-wise ``max(x, 0)``; the subgradient at 0 is taken as 0."""
    mask = x.data > 0.0
    out = np.where(mask, x.data, 0.0)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * mask)

    return Tensor._from_op(out, "relu", (x,), backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    """Element-wise logistic function ``1 / (1 + exp(-x))``.

    Evaluated in the numerically stable split form so large-magnitude inputs
    never overflow ``exp``.
    """
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * out * (1.0 - out))

    return Tensor._from_op(out, "sigmoid", (x,), backward_fn)


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid}


def activation(x: Tensor, kind: str) -> Tensor:
    """Apply a named activation; ``kind`` is ``"relu"`` or ``"sigmoid"``."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(
            f"unknown activation {kind!r}, expected one of {sorted(_ACTIVATIONS)}"
        ) from None
    return fn(x)


# ---------------------------------------------------------------------------
# Pooling and pixel shuffling
# ---------------------------------------------------------------------------


def global_avg_pool(x: Tensor) -> Tensor:
    """Average each channel map to a single value: ``[N,C,H,W] -> [N,C,1,1]``."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool input must be 4-D, got shape {x.shape}")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g / (h * w), x.data.shape))

    return Tensor._from_op(out, "global_avg_pool", (x,), backward_fn)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange channel blocks into space: ``[N, C*r^2, H, W] -> [N, C, H*r, W*r]``.

    Output element ``[n, c, h*r + i, w*r + j]`` comes from input element
    ``[n, c*r*r + i*r + j, h, w]``; the transform is a pure permutation.
    """
    if r < 1:
        raise ValueError(f"pixel_shuffle factor must be >= 1, got {r}")
    if x.ndim != 4:
        raise ValueError(f"pixel_shuffle input must be 4-D, got shape {x.shape}")
    n, c_r2, h, w = x.shape
    if c_r2 % (r * r) != 0:
        raise ValueError(
            f"pixel_shuffle needs channels divisible by r^2 = {r * r}, got {c_r2} channels"
        )
    c = c_r2 // (r * r)
    out = (
        x.data.reshape(n, c, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, c, h * r, w * r)
    )

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, _unshuffle_array(g, r))

    return Tensor._from_op(out, f"pixel_shuffle[{r}]", (x,), backward_fn)


def _unshuffle_array(a: np.ndarray, r: int) -> np.ndarray:
    n, c, hr, wr = a.shape
    h, w = hr // r, wr // r
    return a.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Inverse of :func:`pixel_shuffle`: ``[N, C, H*r, W*r] -> [N, C*r^2, H, W]``."""
    if r < 1:
        raise ValueError(f"pixel_unshuffle factor must be >= 1, got {r}")
    if x.ndim != 4:
        raise ValueError(f"pixel_unshuffle input must be 4-D, got shape {x.shape}")
    n, c, hr, wr = x.shape
    if hr % r != 0 or wr % r != 0:
        raise ValueError(
            f"pixel_unshuffle needs spatial extents divisible by {r}, got {hr}x{wr}"
        )
    out = _unshuffle_array(x.data, r)

    def backward_fn(g: np.ndarray) -> None:
        n2, c_r2, h, w = g.shape
        c2 = c_r2 // (r * r)
        shuffled = (
            g.reshape(n2, c2, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n2, c2, h * r, w * r)
        )
        _accumulate(x, shuffled)

    return Tensor._from_op(out, f"pixel_unshuffle[{r}]", (x,), backward_fn)


# ---------------------------------------------------------------------------
# Element-wise combination
# ---------------------------------------------------------------------------


def _check_combinable(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    # The only broadcast the network needs: a per-channel [N, C, 1, 1]
    # scaling vector applied across a [N, C, H, W] feature map.
    if a.ndim == 4 and b.ndim == 4 and a.shape[:2] == b.shape[:2]:
        if a.shape[2:] == (1, 1) or b.shape[2:] == (1, 1):
            return
    raise ValueError(
        f"{op}: shapes {a.shape} and {b.shape} are neither equal nor a "
        f"[N,C,1,1]-over-[N,C,H,W] channel broadcast"
    )


def _reduce_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    return g.sum(axis=axes, keepdims=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise sum; accepts equal shapes or a channel-vector broadcast."""
    _check_combinable(a, b, "add")
    out = a.data + b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _reduce_to_shape(g, a.data.shape))
        _accumulate(b, _reduce_to_shape(g, b.data.shape))

    return Tensor._from_op(out, "add", (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product; accepts equal shapes or a channel-vector broadcast."""
    _check_combinable(a, b, "mul")
    out = a.data * b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _reduce_to_shape(g * b.data, a.data.shape))
        _accumulate(b, _reduce_to_shape(g * a.data, b.data.shape))

    return Tensor._from_op(out, "mul", (a, b), backward_fn)


_COMBINERS = {"add": add, "mul": mul}


def combine(a: Tensor, b: Tensor, kind: str) -> Tensor:
    """Apply a named element-wise combination (``"add"`` or ``"mul"``)."""
    try:
        fn = _COMBINERS[kind]
    except KeyError:
        raise ValueError(
            f"unknown combination {kind!r}, expected one of {sorted(_COMBINERS)}"
        ) from None
    return fn(a, b)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate ``[N, C_i, H, W]`` tensors along the channel axis."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat_channels requires at least one tensor")
    first = parts[0]
    for t in parts:
        if t.ndim != 4:
            raise ValueError(f"concat_channels inputs must be 4-D, got shape {t.shape}")
        if t.shape[0] != first.shape[0] or t.shape[2:] != first.shape[2:]:
            raise ValueError(
                f"concat_channels inputs must share batch and spatial extents: "
                f"{first.shape} vs {t.shape}"
            )
    out = np.concatenate([t.data for t in parts], axis=1)
    offsets = np.cumsum([0] + [t.shape[1] for t in parts])

    def backward_fn(g: np.ndarray) -> None:
        for t, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[:, start:stop])

    return Tensor._from_op(out, "concat_channels", tuple(parts), backward_fn)


# ---------------------------------------------------------------------------
# Fully connected layer
# ---------------------------------------------------------------------------


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weight.T + bias`` for ``x`` of shape ``[N, C]``.

    ``weight`` is ``[K, C]`` and ``bias`` is ``[K]``, mirroring the
    convolution convention of out-features-first.
    """
    if x.ndim != 2:
        raise ValueError(f"fully_connected input must be 2-D [N, C], got shape {x.shape}")
    if weight.ndim != 2 or bias.ndim != 1:
        raise ValueError(
            f"fully_connected expects weight [K, C] and bias [K], got {weight.shape} and {bias.shape}"
        )
    n, c = x.shape
    k, c_w = weight.shape
    if c != c_w:
        raise ValueError(
            f"fully_connected feature mismatch: input has {c} features, weight expects {c_w}"
        )
    if bias.shape[0] != k:
        raise ValueError(f"fully_connected bias length {bias.shape[0]} != out features {k}")
    out = x.data @ weight.data.T + bias.data[None, :]

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g @ weight.data)
        _accumulate(weight, g.T @ x.data)
        _accumulate(bias, g.sum(axis=0))

    return Tensor._from_op(out, "fully_connected", (x, weight, bias), backward_fn)


# ---------------------------------------------------------------------------
# Shape and reduction utilities
# ---------------------------------------------------------------------------


def _slice(x: Tensor, key) -> Tensor:
    """Basic slicing as a differentiable op (gradient scatters back)."""
    out = x.data[key]
    if not isinstance(out, np.ndarray) or out.ndim != x.ndim:
        raise ValueError(
            "tensor slicing must keep dimensionality; use slice objects, not integer indices"
        )
    out = out.copy()

    def backward_fn(g: np.ndarray) -> None:
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[key] += g

    return Tensor._from_op(out, "slice", (x,), backward_fn)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reshape to a compatible shape; the gradient reshapes back."""
    out = x.data.reshape(shape).copy()

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g.reshape(x.data.shape))

    return Tensor._from_op(out, "reshape", (x,), backward_fn)


def absolute(x: Tensor) -> Tensor:
    """Element-wise ``|x|``; the subgradient at 0 is taken as 0."""
    out = np.abs(x.data)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * np.sign(x.data))

    return Tensor._from_op(out, "abs", (x,), backward_fn)


def sum_all(x: Tensor) -> Tensor:
    """Sum every element into a scalar tensor."""
    out = np.asarray(x.data.sum())

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g, x.data.shape))

    return Tensor._from_op(out, "sum_all", (x,), backward_fn)


def mean_all(x: Tensor) -> Tensor:
    """Average every element into a scalar tensor."""
    count = x.data.size
    out = np.asarray(x.data.mean())

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g / count, x.data.shape))

    return Tensor._from_op(out, "mean_all", (x,), backward_fn)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar (not a graph input)."""
    factor = float(factor)
    out = x.data * factor

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * factor)

    return Tensor._from_op(out, f"scale[{factor}]", (x,), backward_fn)


# ---------------------------------------------------------------------------
# Parameter initialisation
# ---------------------------------------------------------------------------


def he_uniform_conv(
    out_channels: int, in_channels: int, kernel_size: int, rng: np.random.Generator
) -> ConvParams:
    """Kaiming-uniform conv weights: ``U(-b, b)`` with ``b = sqrt(6 / fan_in)``.

    ``fan_in = in_channels * kernel_size^2``; biases start at zero.
    """
    fan_in = in_channels * kernel_size * kernel_size
    bound = math.sqrt(6.0 / fan_in)
    weight = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel_size, kernel_size))
    return ConvParams(
        weight=Tensor(weight, requires_grad=True),
        bias=Tensor(np.zeros(out_channels), requires_grad=True),
    )


def he_uniform_linear(
    out_features: int, in_features: int, rng: np.random.Generator
) -> tuple[Tensor, Tensor]:
    """Kaiming-uniform weights for a fully connected layer; zero bias."""
    bound = math.sqrt(6.0 / in_features)
    weight = rng.uniform(-bound, bound, size=(out_features, in_features))
    return Tensor(weight, requires_grad=True), Tensor(np.zeros(out_features), requires_grad=True)
