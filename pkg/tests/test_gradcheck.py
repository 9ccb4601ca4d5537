"""Finite-difference validation of every operation's backward pass."""

import numpy as np
import pytest

from sspsr import tensor as T
from sspsr.tensor import ConvParams, Tensor

import oracles

TOL = 1e-4
FD_STEP = 1e-5


def check_grads(build_loss, tensors, step=FD_STEP, tol=TOL):
    """Compare analytic gradients of ``build_loss()`` against central differences.

    ``build_loss`` must construct a fresh graph from ``tensors`` (all marked
    ``requires_grad``) each time it is called.
    """
    loss = build_loss()
    loss.backward()
    analytic = [t.grad.copy() for t in tensors]

    def value():
        with T.no_grad():
            return build_loss().item()

    for t, an in zip(tensors, analytic):

        def fn(_arr, _t=t):
            return value()

        numeric = oracles.finite_difference(fn, t.data, step=step)
        err = oracles.relative_gradient_error(an, numeric)
        assert err < tol, f"gradient mismatch {err:.3e} on tensor of shape {t.shape}"


def smooth_loss(out: Tensor) -> Tensor:
    """Scalarise with a smooth weighting so FD probes a generic direction."""
    rng = np.random.default_rng(out.size)
    w = Tensor(rng.standard_normal(out.shape))
    return T.sum_all(T.mul(out, w))


@pytest.mark.parametrize("method", ["im2col", "direct"])
@pytest.mark.parametrize("k", [1, 3])
def test_conv2d_grads(method, k):
    rng = np.random.default_rng(20 + k)
    x = Tensor(rng.standard_normal((2, 3, 5, 4)), requires_grad=True)
    p = ConvParams(
        weight=Tensor(rng.standard_normal((4, 3, k, k)), requires_grad=True),
        bias=Tensor(rng.standard_normal(4), requires_grad=True),
    )
    check_grads(lambda: smooth_loss(T.conv2d(x, p, method=method)), [x, p.weight, p.bias])


def test_relu_grad():
    rng = np.random.default_rng(31)
    # Keep values away from the kink at 0 so FD stays valid.
    data = rng.standard_normal((3, 7))
    data[np.abs(data) < 1e-2] = 0.5
    x = Tensor(data, requires_grad=True)
    check_grads(lambda: smooth_loss(T.relu(x)), [x])


def test_sigmoid_grad():
    x = Tensor(np.random.default_rng(32).standard_normal((4, 5)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.sigmoid(x)), [x])


def test_global_avg_pool_grad():
    x = Tensor(np.random.default_rng(33).standard_normal((2, 3, 4, 5)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.global_avg_pool(x)), [x])


@pytest.mark.parametrize("r", [2, 3])
def test_pixel_shuffle_grads(r):
    x = Tensor(np.random.default_rng(34).standard_normal((2, 2 * r * r, 3, 4)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.pixel_shuffle(x, r)), [x])


def test_pixel_unshuffle_grad():
    x = Tensor(np.random.default_rng(35).standard_normal((2, 3, 6, 4)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.pixel_unshuffle(x, 2)), [x])


def test_add_mul_grads():
    rng = np.random.default_rng(36)
    a = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.add(a, b)), [a, b])
    check_grads(lambda: smooth_loss(T.mul(a, b)), [a, b])


def test_channel_broadcast_grads():
    rng = np.random.default_rng(37)
    fmap = Tensor(rng.standard_normal((2, 3, 5, 5)), requires_grad=True)
    vec = Tensor(rng.standard_normal((2, 3, 1, 1)), requires_grad=True)
    check_grads(lambda: smooth_loss(T.mul(fmap, vec)), [fmap, vec])
    check_grads(lambda: smooth_loss(T.add(fmap, vec)), [fmap, vec])


def test_concat_channels_grad():
    rng = np.random.default_rng(38)
    parts = [Tensor(rng.standard_normal((2, c, 3, 3)), requires_grad=True) for c in (2, 1, 3)]
    check_grads(lambda: smooth_loss(T.concat_channels(parts)), parts)


def test_fully_connected_grads():
    rng = np.random.default_rng(39)
    x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
    b = Tensor(rng.standard_normal(3), requires_grad=True)
    check_grads(lambda: smooth_loss(T.fully_connected(x, w, b)), [x, w, b])


def test_slice_reshape_scale_grads():
    rng = np.random.default_rng(40)
    x = Tensor(rng.standard_normal((2, 6, 4, 4)), requires_grad=True)
    check_grads(lambda: smooth_loss(x[:, 1:5]), [x])
    check_grads(lambda: smooth_loss(T.reshape(x, (2, 96))), [x])
    check_grads(lambda: smooth_loss(T.scale(x, -1.7)), [x])


def test_abs_mean_grads():
    rng = np.random.default_rng(41)
    data = rng.standard_normal((3, 8))
    data[np.abs(data) < 1e-2] = 0.3  # keep FD away from |x| kink
    x = Tensor(data, requires_grad=True)
    check_grads(lambda: T.mean_all(T.absolute(x)), [x])
    check_grads(lambda: T.sum_all(T.absolute(x)), [x])


def test_composite_chain_grad():
    """A small conv -> relu -> attention-style rescale -> pool chain."""
    rng = np.random.default_rng(42)
    x = Tensor(rng.standard_normal((2, 4, 6, 6)), requires_grad=True)
    p = ConvParams(
        weight=Tensor(0.3 * rng.standard_normal((4, 4, 3, 3)), requires_grad=True),
        bias=Tensor(0.1 * rng.standard_normal(4), requires_grad=True),
    )

    def build():
        f = T.relu(T.conv2d(x, p))
        gate = T.sigmoid(T.global_avg_pool(f))
        return T.mean_all(T.mul(f, gate))

    check_grads(build, [x, p.weight, p.bias])
