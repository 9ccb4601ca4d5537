"""Acceptance suite: one check per shipped guarantee, one verdict line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the checklist; every
test prints ``criterion N (label): PASS|FAIL [elapsed]`` regardless of how it
ends.  Expected values and tolerances are frozen here on purpose — they are
the contract, not an implementation detail.
"""

from __future__ import annotations

import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles

import sspsr.tensor as T
from sspsr.blocks import (
    init_sspn_params,
    init_ssb_params,
    sspn_forward,
    ssb_forward,
)
from sspsr.cube import HsiCube
from sspsr.data import SynthConfig, save_cube, load_cube, synth_cube
from sspsr.grouping import plan_groups
from sspsr.losses import LossConfig, l1_loss, sstv_loss, total_loss
from sspsr.metrics import cc, ergas, evaluate_all, psnr, rmse, sam, ssim
from sspsr.network import (
    NetworkConfig,
    count_params,
    forward_flops,
    init_params,
    load_checkpoint,
    named_parameters,
    save_checkpoint,
    sspsr_forward,
)
from sspsr.tensor import Tensor
from sspsr.train import (
    TrainConfig,
    desk_network_config,
    evaluate,
    super_resolve,
    train,
)

FD_STEP = 1e-5
GRAD_TOL = 1e-4


def _verdict(num: int, label: str, budget: float | None, body) -> None:
    """Run ``body``, print exactly one pass/fail line, then re-raise failures."""
    t0 = time.monotonic()
    error: BaseException | None = None
    note = ""
    try:
        out = body()
        if isinstance(out, str):
            note = f" {out}"
    except BaseException as exc:  # re-raised below; the line must print first
        error = exc
    elapsed = time.monotonic() - t0
    over = budget is not None and elapsed > budget
    status = "PASS" if error is None and not over else "FAIL"
    print(f"criterion {num} ({label}): {status} [{elapsed:.1f}s]{note}", flush=True)
    if error is not None:
        raise error
    if over:
        pytest.fail(f"runtime {elapsed:.1f}s exceeds the {budget:.0f}s budget")


# --------------------------------------------------------------------------
# 1. band grouping arithmetic
# --------------------------------------------------------------------------

def test_01_band_grouping_table():
    def body():
        table = {
            (128, 0): 1,
            (1, 0): 128,
            (8, 0): 16,
            (8, 2): 21,
            (8, 4): 31,
            (8, 6): 61,
        }
        for (size, overlap), want in table.items():
            got = plan_groups(128, size, overlap).group_count
            assert got == want, f"(p={size}, o={overlap}): {got} != {want}"

    _verdict(1, "band grouping table", 1.0, body)


# --------------------------------------------------------------------------
# 2. gradient suite
# --------------------------------------------------------------------------

def _fd_check(build_loss, tensors, coords_per_tensor=None, rng=None, tol=GRAD_TOL):
    """Central finite differences against analytic gradients.

    Checks every coordinate by default; with ``coords_per_tensor`` it probes
    a random subset instead (for models where the full sweep is too slow).
    """
    build_loss().backward()
    analytic = [t.grad.copy().reshape(-1) for t in tensors]

    def value() -> float:
        with T.no_grad():
            return build_loss().item()

    for tensor, grad in zip(tensors, analytic):
        flat = tensor.data.reshape(-1)
        if coords_per_tensor is None:
            coords = np.arange(flat.size)
        else:
            take = min(coords_per_tensor, flat.size)
            coords = rng.choice(flat.size, size=take, replace=False)
        numeric = np.empty(coords.size)
        for j, i in enumerate(coords):
            keep = flat[i]
            flat[i] = keep + FD_STEP
            hi = value()
            flat[i] = keep - FD_STEP
            lo = value()
            flat[i] = keep
            numeric[j] = (hi - lo) / (2 * FD_STEP)
        picked = grad[coords]
        err = np.abs(picked - numeric).max() / max(
            np.abs(numeric).max(), np.abs(picked).max(), 1e-8
        )
        assert err < tol, (
            f"gradient mismatch {err:.3e} on tensor of shape {tensor.shape}"
        )


def _smooth(out: Tensor) -> Tensor:
    """Everywhere-differentiable scalar readout of an activation map."""
    return T.mean_all(T.mul(out, T.sigmoid(out)))


def _op_suite(seed: int) -> None:
    """Finite-difference check of every differentiable tensor op, one seed."""
    rng = np.random.default_rng(seed)

    x = Tensor(rng.standard_normal((1, 3, 5, 5)), requires_grad=True)
    conv = T.he_uniform_conv(4, 3, 3, rng)
    for method in ("im2col", "direct"):
        _fd_check(
            lambda m=method: _smooth(T.conv2d(x, conv, method=m)),
            [x, conv.weight, conv.bias],
        )

    a = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    vec = Tensor(rng.standard_normal((2, 3, 1, 1)), requires_grad=True)
    _fd_check(lambda: _smooth(T.add(a, b)), [a, b])
    _fd_check(lambda: _smooth(T.mul(a, b)), [a, b])
    _fd_check(lambda: _smooth(T.add(a, vec)), [a, vec])
    _fd_check(lambda: _smooth(T.mul(a, vec)), [a, vec])
    _fd_check(lambda: _smooth(T.relu(a)), [a])
    _fd_check(lambda: _smooth(T.sigmoid(a)), [a])
    _fd_check(lambda: _smooth(T.global_avg_pool(a)), [a])
    _fd_check(lambda: _smooth(T.scale(a, -1.7)), [a])
    _fd_check(lambda: _smooth(a[:, 1:3]), [a])
    _fd_check(lambda: _smooth(T.reshape(a, (2, 48))), [a])
    _fd_check(lambda: T.mean_all(T.absolute(a)), [a])
    _fd_check(lambda: T.sum_all(T.absolute(a)), [a])

    s = Tensor(rng.standard_normal((1, 8, 3, 3)), requires_grad=True)
    _fd_check(lambda: _smooth(T.pixel_shuffle(s, 2)), [s])
    u = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
    _fd_check(lambda: _smooth(T.pixel_unshuffle(u, 2)), [u])

    parts = [
        Tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
        for _ in range(3)
    ]
    _fd_check(lambda: _smooth(T.concat_channels(parts)), parts)

    fx = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    fw = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    fb = Tensor(rng.standard_normal((4,)), requires_grad=True)
    _fd_check(lambda: _smooth(T.fully_connected(fx, fw, fb)), [fx, fw, fb])

    pred = Tensor(rng.random((2, 3, 4, 4)), requires_grad=True)
    target = Tensor(rng.random((2, 3, 4, 4)))
    _fd_check(lambda: l1_loss(pred, target), [pred])
    _fd_check(lambda: sstv_loss(pred), [pred])


def test_02_gradient_suite():
    def body():
        op_seeds = range(20)
        for seed in op_seeds:
            _op_suite(seed)

        # One full spatial-spectral block, every parameter coordinate.
        for seed in (100, 101, 102):
            rng = np.random.default_rng(seed)
            x = Tensor(rng.standard_normal((1, 6, 5, 5)), requires_grad=True)
            block = init_ssb_params(6, rng, reduction=3)
            tensors = [x] + [t for _, t in _named_block_tensors(block)]
            _fd_check(lambda: _smooth(ssb_forward(x, block)), tensors)

        # Micro end-to-end network: sampled coordinates, analytic vs numeric.
        cfg = NetworkConfig(
            bands=6, scale=2, group_size=4, overlap=2, n_feats=4, n_blocks=1,
            attention_reduction=2,
        )
        for seed in (200, 201, 202):
            rng = np.random.default_rng(seed)
            params = init_params(cfg, seed)
            x = Tensor(rng.random((1, 6, 4, 4)), requires_grad=True)
            target = Tensor(rng.random((1, 6, 8, 8)))
            weights = [t for _, t in named_parameters(params)]
            _fd_check(
                lambda: total_loss(
                    sspsr_forward(x, params, cfg), target, LossConfig(alpha=1e-3)
                ),
                [x] + weights,
                coords_per_tensor=3,
                rng=rng,
            )
        return f"(seeds: {len(list(op_seeds))} op suites + SSB + end-to-end)"

    _verdict(2, "gradient finite-difference suite", 120.0, body)


def _named_block_tensors(block):
    convs = [
        ("spatial_conv1", block.spatial_conv1),
        ("spatial_conv2", block.spatial_conv2),
        ("spectral_conv1", block.spectral_conv1),
        ("spectral_conv2", block.spectral_conv2),
    ]
    out = []
    for name, conv in convs:
        out.append((f"{name}.weight", conv.weight))
        out.append((f"{name}.bias", conv.bias))
    att = block.attention
    out += [
        ("attention.fc1_weight", att.fc1_weight),
        ("attention.fc1_bias", att.fc1_bias),
        ("attention.fc2_weight", att.fc2_weight),
        ("attention.fc2_bias", att.fc2_bias),
    ]
    return out


# --------------------------------------------------------------------------
# 3. parameter sharing: constant params, growing FLOPs
# --------------------------------------------------------------------------

def test_03_shared_params_invariant_flops_grow():
    def body():
        counts = []
        flops = []
        groups = []
        for overlap in (0, 2, 4, 6):
            cfg = NetworkConfig(
                bands=128, scale=4, group_size=8, overlap=overlap,
                n_feats=256, n_blocks=3,
            )
            counts.append(count_params(init_params(cfg, 0)))
            flops.append(forward_flops(cfg, (1, 128, 8, 8)))
            groups.append(plan_groups(128, 8, overlap).group_count)
        assert groups == [16, 21, 31, 61]
        assert len(set(counts)) == 1, f"params vary with overlap: {counts}"
        assert counts[0] == 13_564_392
        assert all(f2 > f1 for f1, f2 in zip(flops, flops[1:])), (
            f"FLOPs not strictly increasing: {flops}"
        )
        return f"(params {counts[0]:_} constant; FLOPs x{flops[-1] / flops[0]:.2f})"

    _verdict(3, "shared parameters, growing FLOPs", None, body)


# --------------------------------------------------------------------------
# 4. zero-weight identities and ablation topologies
# --------------------------------------------------------------------------

def _zero_block(block) -> None:
    for _, tensor in _named_block_tensors(block):
        tensor.data[:] = 0.0


def test_04_zero_identities_and_ablations():
    def body():
        rng = np.random.default_rng(0)

        # Zero-weight residual block is the identity map.
        x = Tensor(rng.standard_normal((2, 5, 6, 6)))
        block = init_ssb_params(5, np.random.default_rng(1))
        _zero_block(block)
        np.testing.assert_array_equal(ssb_forward(x, block).data, x.data)

        # Zero-weight trunk (blocks + its own skip) exactly doubles the input.
        trunk = init_sspn_params(2, 5, np.random.default_rng(2))
        for blk in trunk.blocks:
            _zero_block(blk)
        np.testing.assert_array_equal(
            sspn_forward(x, trunk).data, 2.0 * x.data
        )

        base = NetworkConfig(
            bands=16, scale=4, group_size=4, overlap=1, n_feats=8, n_blocks=1
        )
        probe = Tensor(np.random.default_rng(3).random((1, 16, 6, 6)))
        s = plan_groups(16, 4, 1).group_count
        p_shared = init_params(base, 0)

        # No grouping: a single branch spanning every band.
        ng = replace(base, use_grouping=False)
        p = init_params(ng, 0)
        assert len(p.branches) == 1
        assert p.branches[0].shallow.weight.shape[1] == 16
        assert sspsr_forward(probe, p, ng).shape == (1, 16, 24, 24)

        # No progressive upsampling: branches stay at input scale and the
        # global trunk carries one direct x4 stage instead of stacked x2s.
        np_cfg = replace(base, use_progressive=False, branch_scale=1)
        p = init_params(np_cfg, 0)
        assert p.branches[0].upsample == []
        assert len(p.global_net.upsample) == 1
        assert p.global_net.upsample[0].weight.shape == (16 * 8, 8, 3, 3)
        assert sspsr_forward(probe, p, np_cfg).shape == (1, 16, 24, 24)
        assert len(p_shared.branches[0].upsample) == 1
        assert len(p_shared.global_net.upsample) == 1

        # No sharing: one parameter copy per branch, and the total grows by
        # exactly one branch's parameters per extra copy.
        ns = replace(base, share_params=False)
        p_per = init_params(ns, 0)
        assert len(p_shared.branches) == 1 and len(p_per.branches) == s
        branch_size = sum(
            t.data.size
            for name, t in named_parameters(p_shared)
            if name.startswith("branch.")
        )
        assert count_params(p_per) == (
            count_params(p_shared) + (s - 1) * branch_size
        )
        assert sspsr_forward(probe, p_per, ns).shape == (1, 16, 24, 24)

        # No attention: the channel gate disappears from the parameter tree
        # and from the count.
        na = replace(base, use_attention=False)
        p = init_params(na, 0)
        names = [n for n, _ in named_parameters(p)]
        assert not any("attention" in n for n in names)
        gate = 2 * ((8 * 1 + 1) + (1 * 8 + 8))
        assert count_params(p_shared) - count_params(p) == gate
        assert sspsr_forward(probe, p, na).shape == (1, 16, 24, 24)

    _verdict(4, "zero-weight identities and ablations", None, body)


# --------------------------------------------------------------------------
# 5. metric oracles
# --------------------------------------------------------------------------

def test_05_metric_oracles():
    def body():
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            x = rng.random((5, 8, 8))
            y = rng.random((5, 8, 8))
            pairs = [
                (cc(x, y), oracles.cc_loops(x, y)),
                (sam(x, y), oracles.sam_loops(x, y)),
                (rmse(x, y), oracles.rmse_loops(x, y)),
                (ergas(x, y, 2), oracles.ergas_loops(x, y, 2)),
                (psnr(x, y), oracles.psnr_loops(x, y)),
            ]
            # The structural-similarity window needs 11x11 support, so that
            # leg runs on 16x16 planes.
            xs = rng.random((5, 16, 16))
            ys = rng.random((5, 16, 16))
            pairs.append((ssim(xs, ys), oracles.ssim_loops(xs, ys)))
            for got, want in pairs:
                worst = max(worst, abs(got - want))
                assert abs(got - want) < 1e-9, f"{got} vs {want}"

        # Perfect reconstruction hits the exact fixed point.
        z = HsiCube(rng.random((5, 16, 16)))
        rep = evaluate_all(z, z.copy(), scale=2)
        assert (rep.cc, rep.sam, rep.rmse, rep.ergas, rep.psnr, rep.ssim) == (
            1.0, 0.0, 0.0, 0.0, 100.0, 1.0
        )
        return f"(worst |diff| {worst:.2e})"

    _verdict(5, "quality metrics vs loop oracles", 30.0, body)


# --------------------------------------------------------------------------
# 6. desk-scale learning check
# --------------------------------------------------------------------------

# Bring-up recipe: synthetic mixtures with sharp region boundaries and
# equalised per-band contrast, trained with a short-horizon optimiser
# profile.  Frozen after measurement; see the training log in the repo
# history for the recorded margin.
DESK_TASK = dict(
    bands=16, height=48, width=48, smoothness=2.0, edge_sharpness=16.0,
    n_endmembers=6, band_contrast=0.6, noise=0.003,
)
DESK_TRAIN = dict(
    lr0=7e-3, lr_decay_epoch=10, epochs=40, batch_size=8, beta2=0.8,
    alpha=0.0, seed=0, max_steps=200, patch_size=24, patch_overlap=8,
)
DESK_TRAIN_SEEDS = range(10)
DESK_VAL_SEEDS = (20, 21)
DESK_TEST_SEEDS = (22, 23, 24)


def test_06_desk_scale_learning():
    def body():
        cubes = {
            seed: synth_cube(SynthConfig(seed=seed, **DESK_TASK))
            for seed in (*DESK_TRAIN_SEEDS, *DESK_VAL_SEEDS, *DESK_TEST_SEEDS)
        }
        net_cfg = desk_network_config(bands=16, scale=4)
        result = train(
            [cubes[s] for s in DESK_TRAIN_SEEDS],
            [cubes[s] for s in DESK_VAL_SEEDS],
            net_cfg,
            TrainConfig(**DESK_TRAIN),
        )
        report = evaluate(
            (result.config, result.params),
            [cubes[s] for s in DESK_TEST_SEEDS],
        )
        margin = report.model_mean.psnr - report.bicubic_mean.psnr
        losses = result.state.loss_history
        assert losses[-1] < losses[0], (
            f"loss did not decrease: {losses[0]:.4f} -> {losses[-1]:.4f}"
        )
        assert margin >= 0.5, (
            f"margin over bicubic {margin:+.3f} dB is below 0.5 dB "
            f"(model {report.model_mean.psnr:.2f}, "
            f"bicubic {report.bicubic_mean.psnr:.2f})"
        )
        return (
            f"(margin {margin:+.2f} dB; loss {losses[0]:.3f}->{losses[-1]:.3f})"
        )

    _verdict(6, "desk-scale learning margin", 600.0, body)


# --------------------------------------------------------------------------
# 7. loss exactness
# --------------------------------------------------------------------------

def test_07_loss_exactness():
    def body():
        for seed in range(20):
            rng = np.random.default_rng(seed)
            pred = rng.random((3, 4, 4))
            target = rng.random((3, 4, 4))
            tp = Tensor(pred[None])
            tt = Tensor(target[None])
            assert abs(l1_loss(tp, tt).item() - oracles.l1_loops(pred, target)) < 1e-12
            assert abs(sstv_loss(tp).item() - oracles.sstv_loops(pred[None])) < 1e-12
            # With the smoothing term switched off the objective is the
            # plain absolute error, bit for bit.
            zero = total_loss(tp, tt, LossConfig(alpha=0.0))
            assert zero.item() == l1_loss(tp, tt).item()

    _verdict(7, "loss functions vs loop oracles", None, body)


# --------------------------------------------------------------------------
# 8. file-format round trips
# --------------------------------------------------------------------------

def test_08_io_round_trips(tmp_path):
    def body():
        rng = np.random.default_rng(0)

        # Sample values are stored at single precision, so use data
        # already representable there to demand bitwise equality.
        cube = HsiCube(rng.random((7, 9, 11)).astype(np.float32))
        cube_path = tmp_path / "cube.hsic"
        save_cube(cube, cube_path)
        loaded = load_cube(cube_path)
        assert loaded.data.dtype == cube.data.dtype
        np.testing.assert_array_equal(loaded.data, cube.data)

        cfg = NetworkConfig(
            bands=8, scale=4, group_size=4, overlap=1, n_feats=4, n_blocks=1,
            attention_reduction=2,
        )
        params = init_params(cfg, 7)
        ckpt_path = tmp_path / "weights.sspw"
        save_checkpoint(ckpt_path, cfg, params)
        cfg2, params2 = load_checkpoint(ckpt_path)
        assert cfg2 == cfg
        before = dict(named_parameters(params))
        after = dict(named_parameters(params2))
        assert before.keys() == after.keys()
        for name, tensor in before.items():
            np.testing.assert_array_equal(tensor.data, after[name].data)

        lr_path = tmp_path / "input.hsic"
        out_path = tmp_path / "output.hsic"
        save_cube(HsiCube(rng.random((8, 8, 8))), lr_path)
        super_resolve(ckpt_path, lr_path, out_path)
        sr = load_cube(out_path)
        assert sr.shape == (8, 32, 32)

    _verdict(8, "file-format round trips", None, body)
