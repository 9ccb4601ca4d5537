"""Adam optimisation, the training/evaluation loops, and model application.

Training follows the usual patch regime: high-resolution cubes (optionally
cut into overlapping patches) are degraded by bicubic downsampling to form
the inputs, the network reconstructs them, and the L1-plus-smoothness
objective is minimised with Adam under a one-step learning-rate decay.
Everything is seeded: shuffling, initialisation, and batching are fixed by
the configs, so two runs with the same inputs produce identical logs.

The evaluation loop scores the trained model *and* the plain bicubic
upsample on every test cube, which keeps the baseline comparison honest —
a model row is only meaningful next to the interpolation it must beat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cube import HsiCube
from .data import PatchSpec, extract_patches, load_cube, save_composite_png, save_cube
from .losses import LossConfig, total_loss
from .metrics import CSV_HEADER, MetricReport, evaluate_all, psnr
from .network import (
    NetworkConfig,
    SspsrParams,
    init_params,
    load_checkpoint,
    named_parameters,
    save_checkpoint,
    sspsr_forward,
)
from .resample import bicubic_resize, bicubic_resize_array
from .tensor import Tensor, no_grad

__all__ = [
    "TrainConfig",
    "TrainState",
    "TrainResult",
    "EpochStats",
    "EvalResult",
    "lr_schedule",
    "adam_step",
    "train",
    "evaluate",
    "super_resolve",
    "desk_network_config",
    "desk_train_config",
]


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation hyper-parameters.

    Defaults are the full-scale recipe; ``max_steps`` caps the total number
    of optimiser steps for quick desk-scale runs.  ``patch_size`` (in
    high-resolution pixels) switches training from whole cubes to
    overlapping patches.
    """

    lr0: float = 1e-4
    lr_decay_factor: float = 10.0
    lr_decay_epoch: int = 30
    epochs: int = 40
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    alpha: float = 1e-3
    seed: int = 0
    max_steps: int | None = None
    patch_size: int | None = None
    patch_overlap: int = 0

    def __post_init__(self) -> None:
        if self.lr0 < 0:
            raise ValueError(f"lr0 must be >= 0, got {self.lr0}")
        if self.lr_decay_factor <= 0:
            raise ValueError(f"lr_decay_factor must be positive, got {self.lr_decay_factor}")
        if self.lr_decay_epoch < 0:
            raise ValueError(f"lr_decay_epoch must be >= 0, got {self.lr_decay_epoch}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError(
                f"epochs and batch_size must be >= 1, got {self.epochs} and {self.batch_size}"
            )
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1 when set, got {self.max_steps}")


@dataclass
class TrainState:
    """Adam state: step count, per-parameter moments, current rate, losses."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    lr: float = 0.0
    loss_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_psnr: float
    lr: float

    def csv_row(self) -> str:
        return f"{self.epoch},{self.train_loss:.8f},{self.val_psnr:.4f},{self.lr:.8g}"


@dataclass
class TrainResult:
    """Best-validation weights plus the full per-epoch history."""

    config: NetworkConfig
    params: SspsrParams
    best_epoch: int
    best_val_psnr: float
    history: list[EpochStats]
    state: TrainState


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Step schedule: ``lr0`` before the decay epoch, ``lr0 / factor`` from it on."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if epoch < cfg.lr_decay_epoch:
        return cfg.lr0
    return cfg.lr0 / cfg.lr_decay_factor


def adam_step(
    params: SspsrParams,
    grads: Mapping[str, np.ndarray] | None,
    state: TrainState,
    lr: float,
    cfg: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place.

    ``grads`` maps parameter names to gradient arrays; pass ``None`` to read
    the ``.grad`` buffers populated by the last backward pass.  Every
    parameter must have a gradient.
    """
    entries = list(named_parameters(params))
    if grads is None:
        grads = {}
        for name, tensor in entries:
            if tensor.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient")
            grads[name] = tensor.grad
    state.step += 1
    t = state.step
    correct_m = 1.0 - cfg.beta1**t
    correct_v = 1.0 - cfg.beta2**t
    for name, tensor in entries:
        g = grads.get(name)
        if g is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        m_hat = m / correct_m
        v_hat = v / correct_v
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    state.lr = lr


# ---------------------------------------------------------------------------
# Dataset preparation
# ---------------------------------------------------------------------------


def _check_cubes(cubes: Sequence[HsiCube], bands: int, scale: int, what: str) -> None:
    if not cubes:
        raise ValueError(f"{what} dataset is empty")
    for i, cube in enumerate(cubes):
        if cube.bands != bands:
            raise ValueError(
                f"{what} cube {i} has {cube.bands} bands, expected {bands}"
            )
        if cube.height % scale or cube.width % scale:
            raise ValueError(
                f"{what} cube {i} extent {cube.height}x{cube.width} is not divisible "
                f"by the scale factor {scale}"
            )


def _training_pairs(
    cubes: Sequence[HsiCube], scale: int, cfg: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (LR, HR) training arrays, optionally from overlapping patches."""
    if cfg.patch_size is not None:
        if cfg.patch_size % scale:
            raise ValueError(
                f"patch_size {cfg.patch_size} must be divisible by the scale factor {scale}"
            )
        spec = PatchSpec(patch_size=cfg.patch_size, overlap=cfg.patch_overlap)
        hr_list = [p.data for cube in cubes for p in extract_patches(cube, spec)]
    else:
        hr_list = [cube.data for cube in cubes]
    hr = np.stack(hr_list)
    lr = bicubic_resize_array(hr, scale, "down")
    return lr, hr


def _snapshot(params: SspsrParams) -> list[np.ndarray]:
    return [t.data.copy() for _, t in named_parameters(params)]


def _restore(params: SspsrParams, snapshot: list[np.ndarray]) -> None:
    for (_, tensor), saved in zip(named_parameters(params), snapshot):
        tensor.data = saved.copy()


def _validation_psnr(
    val_cubes: Sequence[HsiCube], params: SspsrParams, net_cfg: NetworkConfig
) -> float:
    scores = []
    with no_grad():
        for cube in val_cubes:
            lr_cube = bicubic_resize(cube, net_cfg.scale, "down")
            sr = sspsr_forward(lr_cube.to_batch(), params, net_cfg)
            sr_cube = HsiCube.from_batch(sr).clipped()
            scores.append(psnr(cube.data, sr_cube.data))
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train(
    train_cubes: Sequence[HsiCube],
    val_cubes: Sequence[HsiCube],
    net_cfg: NetworkConfig,
    train_cfg: TrainConfig,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Fit the network and keep the weights with the best validation PSNR.

    The log (written to ``log_path`` when given, and always returned in
    ``history``) holds one CSV row per completed epoch:
    ``epoch,train_loss,val_psnr,lr``.  Ties on validation PSNR keep the
    earlier epoch's weights.  A non-finite loss aborts with an error rather
    than silently continuing.
    """
    _check_cubes(train_cubes, net_cfg.bands, net_cfg.scale, "training")
    _check_cubes(val_cubes, net_cfg.bands, net_cfg.scale, "validation")

    lr_data, hr_data = _training_pairs(train_cubes, net_cfg.scale, train_cfg)
    n_samples = lr_data.shape[0]
    params = init_params(net_cfg, seed=train_cfg.seed)
    state = TrainState()
    loss_cfg = LossConfig(alpha=train_cfg.alpha)
    shuffler = np.random.default_rng(train_cfg.seed)

    best_epoch = -1
    best_psnr = -math.inf
    best_weights = _snapshot(params)
    history: list[EpochStats] = []
    out_of_steps = False

    for epoch in range(train_cfg.epochs):
        lr = lr_schedule(epoch, train_cfg)
        order = shuffler.permutation(n_samples)
        epoch_losses = []
        for start in range(0, n_samples, train_cfg.batch_size):
            batch = order[start : start + train_cfg.batch_size]
            x = Tensor(lr_data[batch])
            target = Tensor(hr_data[batch])
            pred = sspsr_forward(x, params, net_cfg)
            loss = total_loss(pred, target, loss_cfg)
            value = loss.item()
            if not math.isfinite(value):
                raise RuntimeError(
                    f"non-finite training loss {value} at step {state.step + 1}"
                )
            loss.backward()
            adam_step(params, None, state, lr, train_cfg)
            epoch_losses.append(value)
            state.loss_history.append(value)
            if train_cfg.max_steps is not None and state.step >= train_cfg.max_steps:
                out_of_steps = True
                break

        val_psnr = _validation_psnr(val_cubes, params, net_cfg)
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=float(np.mean(epoch_losses)),
                val_psnr=val_psnr,
                lr=lr,
            )
        )
        if val_psnr > best_psnr:
            best_psnr = val_psnr
            best_epoch = epoch
            best_weights = _snapshot(params)
        if out_of_steps:
            break

    _restore(params, best_weights)
    if log_path is not None:
        Path(log_path).write_text("".join(s.csv_row() + "\n" for s in history))
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, net_cfg, params)
    return TrainResult(
        config=net_cfg,
        params=params,
        best_epoch=best_epoch,
        best_val_psnr=best_psnr,
        history=history,
        state=state,
    )


# ---------------------------------------------------------------------------
# Evaluation and application
# ---------------------------------------------------------------------------


def _resolve_checkpoint(checkpoint) -> tuple[NetworkConfig, SspsrParams]:
    if isinstance(checkpoint, (str, Path)):
        return load_checkpoint(checkpoint)
    cfg, params = checkpoint
    return cfg, params


@dataclass(frozen=True)
class EvalResult:
    """Per-cube and mean rows for the model and the bicubic baseline."""

    model_rows: tuple[tuple[str, MetricReport], ...]
    bicubic_rows: tuple[tuple[str, MetricReport], ...]
    self_rows: tuple[tuple[str, MetricReport], ...]
    model_mean: MetricReport
    bicubic_mean: MetricReport
    scale: int

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        for rows in (self.model_rows, self.bicubic_rows, self.self_rows):
            lines.extend(report.csv_row(cube_id, self.scale) for cube_id, report in rows)
        lines.append(self.model_mean.csv_row("mean:model", self.scale))
        lines.append(self.bicubic_mean.csv_row("mean:bicubic", self.scale))
        return "\n".join(lines) + "\n"


def _mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    return MetricReport(
        cc=float(np.mean([r.cc for r in reports])),
        sam=float(np.mean([r.sam for r in reports])),
        rmse=float(np.mean([r.rmse for r in reports])),
        ergas=float(np.mean([r.ergas for r in reports])),
        psnr=float(np.mean([r.psnr for r in reports])),
        ssim=float(np.mean([r.ssim for r in reports])),
    )


def evaluate(
    checkpoint,
    test_cubes: Sequence[HsiCube],
    cube_ids: Sequence[str] | None = None,
    csv_path: str | Path | None = None,
    self_check: bool = False,
) -> EvalResult:
    """Degrade, reconstruct, and score each test cube; include the baseline.

    ``checkpoint`` is a checkpoint path or an in-memory ``(config, params)``
    pair.  Each cube yields a ``<id>:model`` row and an ``<id>:bicubic`` row;
    ``self_check`` adds an ``<id>:self`` row scoring the ground truth against
    itself (all ideal values, useful to validate the harness).  Mean rows are
    the arithmetic means of the per-cube rows.
    """
    cfg, params = _resolve_checkpoint(checkpoint)
    _check_cubes(test_cubes, cfg.bands, cfg.scale, "test")
    if cube_ids is None:
        cube_ids = [f"cube{i}" for i in range(len(test_cubes))]
    if len(cube_ids) != len(test_cubes):
        raise ValueError(
            f"got {len(cube_ids)} cube ids for {len(test_cubes)} cubes"
        )

    model_rows = []
    bicubic_rows = []
    self_rows = []
    with no_grad():
        for cube_id, cube in zip(cube_ids, test_cubes):
            lr_cube = bicubic_resize(cube, cfg.scale, "down")
            sr = HsiCube.from_batch(sspsr_forward(lr_cube.to_batch(), params, cfg)).clipped()
            # The baseline is scored exactly as the resampler emits it — no
            # clipping or other post-processing — so the comparison is against
            # plain bicubic interpolation.
            upsampled = bicubic_resize(lr_cube, cfg.scale, "up")
            model_rows.append((f"{cube_id}:model", evaluate_all(cube, sr, cfg.scale)))
            bicubic_rows.append((f"{cube_id}:bicubic", evaluate_all(cube, upsampled, cfg.scale)))
            if self_check:
                self_rows.append((f"{cube_id}:self", evaluate_all(cube, cube, cfg.scale)))

    result = EvalResult(
        model_rows=tuple(model_rows),
        bicubic_rows=tuple(bicubic_rows),
        self_rows=tuple(self_rows),
        model_mean=_mean_report([r for _, r in model_rows]),
        bicubic_mean=_mean_report([r for _, r in bicubic_rows]),
        scale=cfg.scale,
    )
    if csv_path is not None:
        Path(csv_path).write_text(result.csv_text())
    return result


def super_resolve(
    checkpoint,
    input_path: str | Path,
    output_path: str | Path,
    png_path: str | Path | None = None,
    png_bands: tuple[int, int, int] | None = None,
) -> HsiCube:
    """Super-resolve one cube file and write the result (clipped to [0, 1])."""
    cfg, params = _resolve_checkpoint(checkpoint)
    cube = load_cube(input_path)
    if cube.bands != cfg.bands:
        raise ValueError(
            f"{input_path}: cube has {cube.bands} bands but the checkpoint "
            f"expects {cfg.bands}"
        )
    with no_grad():
        sr = HsiCube.from_batch(sspsr_forward(cube.to_batch(), params, cfg)).clipped()
    save_cube(sr, output_path)
    if png_path is not None:
        bands = png_bands if png_bands is not None else _default_png_bands(sr.bands)
        save_composite_png(sr, png_path, bands)
    return sr


def _default_png_bands(bands: int) -> tuple[int, int, int]:
    """Spread three display bands across the spectrum (red = farthest band)."""
    return (bands - 1, bands // 2, 0) if bands >= 3 else (0, 0, 0)


# ---------------------------------------------------------------------------
# Desk-scale presets
# ---------------------------------------------------------------------------


def desk_network_config(bands: int, scale: int = 4, **overrides) -> NetworkConfig:
    """Small architecture for laptop-speed experiments and the test suite."""
    defaults = dict(
        bands=bands, scale=scale, group_size=4, overlap=1, n_feats=32, n_blocks=1
    )
    defaults.update(overrides)
    return NetworkConfig(**defaults)


def desk_train_config(**overrides) -> TrainConfig:
    """Training preset matching the desk-scale architecture (200 Adam steps)."""
    defaults = dict(batch_size=8, max_steps=200, epochs=40, lr0=1e-4)
    defaults.update(overrides)
    return TrainConfig(**defaults)
