"""Command-line interface: dataset synthesis, training, evaluation, and inference.

Four subcommands cover the full workflow:

* ``sspsr synth`` — generate a directory of synthetic hyperspectral cubes.
* ``sspsr train`` — train a model on a directory of cubes and save the
  best-validation checkpoint plus a per-epoch CSV log.
* ``sspsr eval`` — score a checkpoint against ground-truth cubes (model and
  bicubic baseline rows) and write the metric CSV.
* ``sspsr sr`` — super-resolve one cube file with a trained checkpoint.

Every network/training option is exposed as a ``--flag`` named after the
corresponding config field.  Options may also be supplied via ``--config
FILE`` holding flat ``key=value`` lines; explicit command-line flags take
precedence over file values, which take precedence over defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Any, Sequence

from .cube import HsiCube
from .data import SynthConfig, load_cube, save_composite_png, save_cube, synth_cube
from .network import NetworkConfig
from .train import TrainConfig, evaluate, super_resolve, train

__all__ = ["main", "build_parser"]


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

_NETWORK_FIELDS = {f.name: f for f in dataclasses.fields(NetworkConfig)}
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, raw: str, target_type: Any) -> Any:
    """Convert one ``key=value`` string to the target field type."""
    text = raw.strip()
    if text.lower() == "none":
        return None
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def _field_type(name: str) -> Any:
    """Best-effort scalar type for a config field (bool/int/float/str)."""
    field = _NETWORK_FIELDS.get(name) or _TRAIN_FIELDS.get(name)
    if field is None:
        raise KeyError(name)
    default = field.default
    if isinstance(default, bool):
        return bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if default is None or default is dataclasses.MISSING:
        # Optional ints (branch_scale) and required ints (bands) both land here.
        return int
    return str


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a flat ``key=value`` config file.

    Blank lines and ``#`` comments are ignored.  Keys must name fields of the
    network or training config; values are converted to the field's type.
    """
    values: dict[str, Any] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _NETWORK_FIELDS and key not in _TRAIN_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw, _field_type(key))
    return values


def _merge_config(
    args: argparse.Namespace, field_names: Sequence[str], file_values: dict[str, Any]
) -> dict[str, Any]:
    """Resolve precedence: explicit flags > config file > dataclass defaults."""
    merged: dict[str, Any] = {}
    for name in field_names:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            merged[name] = flag_value
        elif name in file_values:
            merged[name] = file_values[name]
    return merged


def _add_network_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("network options")
    group.add_argument("--group-size", type=int, dest="group_size", help="bands per group")
    group.add_argument("--overlap", type=int, help="band overlap between groups")
    group.add_argument("--n-feats", type=int, dest="n_feats", help="feature channels")
    group.add_argument("--n-blocks", type=int, dest="n_blocks", help="residual blocks per trunk")
    group.add_argument("--scale", type=int, help="total upsampling factor (2, 4, or 8)")
    group.add_argument(
        "--branch-scale", type=int, dest="branch_scale", help="per-branch upsampling factor"
    )
    for flag, dest in (
        ("--use-grouping", "use_grouping"),
        ("--use-progressive", "use_progressive"),
        ("--share-params", "share_params"),
        ("--use-attention", "use_attention"),
    ):
        group.add_argument(
            flag,
            type=lambda s, d=dest: _parse_value(d, s, bool),
            dest=dest,
            metavar="BOOL",
            help=f"{dest} switch (true/false)",
        )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training options")
    group.add_argument("--lr0", type=float, help="initial learning rate")
    group.add_argument("--lr-decay-factor", type=float, dest="lr_decay_factor")
    group.add_argument("--lr-decay-epoch", type=int, dest="lr_decay_epoch")
    group.add_argument("--epochs", type=int)
    group.add_argument("--batch-size", type=int, dest="batch_size")
    group.add_argument("--beta1", type=float)
    group.add_argument("--beta2", type=float)
    group.add_argument("--eps", type=float)
    group.add_argument("--alpha", type=float, help="spatial-spectral TV loss weight")
    group.add_argument("--seed", type=int)
    group.add_argument("--max-steps", type=int, dest="max_steps")
    group.add_argument("--patch-size", type=int, dest="patch_size")
    group.add_argument("--patch-overlap", type=int, dest="patch_overlap")


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _load_cube_dir(directory: str | Path) -> tuple[list[str], list[HsiCube]]:
    paths = sorted(Path(directory).glob("*.hsic"))
    if not paths:
        raise FileNotFoundError(f"no .hsic cube files found in {directory}")
    return [p.stem for p in paths], [load_cube(p) for p in paths]


def _cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        cfg = SynthConfig(
            bands=args.bands,
            height=args.height,
            width=args.width,
            smoothness=args.smoothness,
            n_endmembers=args.n_endmembers,
            noise=args.noise,
            edge_sharpness=args.edge_sharpness,
            band_contrast=args.band_contrast,
            seed=args.seed + i,
        )
        cube = synth_cube(cfg)
        path = out_dir / f"cube_{i:03d}.hsic"
        save_cube(cube, path)
        if args.png:
            bands = (0, cube.bands // 2, cube.bands - 1)
            save_composite_png(cube, path.with_suffix(".png"), bands)
    print(f"wrote {args.count} cube(s) to {out_dir}")
    return 0


def _split_validation(
    cubes: list[HsiCube], fraction: float, seed: int
) -> tuple[list[HsiCube], list[HsiCube]]:
    """Deterministically hold out a validation fraction (at least one cube)."""
    import numpy as np

    if not 0 < fraction < 1:
        raise ValueError(f"val fraction must lie in (0, 1), got {fraction}")
    if len(cubes) < 2:
        raise ValueError("need at least 2 cubes to split off a validation set")
    order = np.random.default_rng(seed).permutation(len(cubes))
    n_val = max(1, round(fraction * len(cubes)))
    if n_val >= len(cubes):
        n_val = len(cubes) - 1
    val_idx = set(order[:n_val].tolist())
    train_cubes = [c for i, c in enumerate(cubes) if i not in val_idx]
    val_cubes = [c for i, c in enumerate(cubes) if i in val_idx]
    return train_cubes, val_cubes


def _cmd_train(args: argparse.Namespace) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    _, cubes = _load_cube_dir(args.data_dir)

    net_kwargs = _merge_config(args, list(_NETWORK_FIELDS), file_values)
    net_kwargs.setdefault("bands", cubes[0].bands)
    net_cfg = NetworkConfig(**net_kwargs)
    train_cfg = TrainConfig(**_merge_config(args, list(_TRAIN_FIELDS), file_values))

    train_cubes, val_cubes = _split_validation(cubes, args.val_fraction, train_cfg.seed)
    result = train(
        train_cubes,
        val_cubes,
        net_cfg,
        train_cfg,
        checkpoint_path=args.checkpoint,
        log_path=args.log,
    )
    print(
        f"trained {len(train_cubes)} cube(s), validated on {len(val_cubes)}; "
        f"best val PSNR {result.best_val_psnr:.4f} dB at epoch {result.best_epoch}; "
        f"checkpoint saved to {args.checkpoint}"
    )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    ids, cubes = _load_cube_dir(args.data_dir)
    result = evaluate(
        args.checkpoint,
        cubes,
        cube_ids=ids,
        csv_path=args.csv,
        self_check=args.self_check,
    )
    print(result.csv_text(), end="")
    mean_model = result.model_mean.psnr
    mean_bicubic = result.bicubic_mean.psnr
    print(
        f"# mean PSNR: model {mean_model:.4f} dB, bicubic {mean_bicubic:.4f} dB",
        file=sys.stderr,
    )
    return 0


def _cmd_sr(args: argparse.Namespace) -> int:
    cube = super_resolve(args.checkpoint, args.input, args.output)
    if args.png:
        bands = (0, cube.bands // 2, cube.bands - 1)
        save_composite_png(cube, Path(args.output).with_suffix(".png"), bands)
    print(f"wrote {cube.bands}x{cube.height}x{cube.width} cube to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspsr",
        description="Grouped spatial-spectral hyperspectral image super-resolution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic cubes")
    p_synth.add_argument("--out-dir", required=True, dest="out_dir")
    p_synth.add_argument("--count", type=int, default=1, help="number of cubes")
    p_synth.add_argument("--bands", type=int, default=16)
    p_synth.add_argument("--height", type=int, default=48)
    p_synth.add_argument("--width", type=int, default=48)
    p_synth.add_argument("--smoothness", type=float, default=2.0)
    p_synth.add_argument("--n-endmembers", type=int, dest="n_endmembers", default=4)
    p_synth.add_argument("--noise", type=float, default=0.003)
    p_synth.add_argument("--edge-sharpness", type=float, dest="edge_sharpness", default=4.0)
    p_synth.add_argument("--band-contrast", type=float, dest="band_contrast", default=None)
    p_synth.add_argument("--seed", type=int, default=0, help="seed of the first cube")
    p_synth.add_argument("--png", action="store_true", help="also write RGB composites")
    p_synth.set_defaults(func=_cmd_synth)

    p_train = sub.add_parser("train", help="train a model")
    p_train.add_argument("--data-dir", required=True, dest="data_dir")
    p_train.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p_train.add_argument("--log", help="per-epoch CSV log path")
    p_train.add_argument("--config", help="key=value config file")
    p_train.add_argument(
        "--val-fraction",
        type=float,
        dest="val_fraction",
        default=0.1,
        help="held-out validation fraction (seeded split)",
    )
    p_train.add_argument("--bands", type=int, help="spectral bands (default: from data)")
    _add_network_flags(p_train)
    _add_train_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint against ground truth")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data-dir", required=True, dest="data_dir")
    p_eval.add_argument("--csv", help="write the metric table here")
    p_eval.add_argument(
        "--self-check",
        action="store_true",
        dest="self_check",
        help="add ground-truth-vs-itself rows",
    )
    p_eval.set_defaults(func=_cmd_eval)

    p_sr = sub.add_parser("sr", help="super-resolve one cube file")
    p_sr.add_argument("--checkpoint", required=True)
    p_sr.add_argument("--input", required=True, help="input .hsic cube")
    p_sr.add_argument("--output", required=True, help="output .hsic path")
    p_sr.add_argument("--png", action="store_true", help="also write an RGB composite")
    p_sr.set_defaults(func=_cmd_sr)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
