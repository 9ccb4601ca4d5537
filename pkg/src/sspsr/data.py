"""Cube file I/O, patch extraction, and synthetic cube generation.

File format (HSIC)
------------------
A cube file is a fixed header followed by raw samples:

====== ======= ==========================================
offset size    contents
====== ======= ==========================================
0      4       magic ``b"HSIC"``
4      4       format version, little-endian u32 (= 1)
8      12      bands, height, width (little-endian u32 each)
20     4*B*H*W band-major float32 little-endian samples
====== ======= ==========================================

Samples must lie in ``[0, 1]``.  Values are stored in 32 bits and widened
to float64 in memory, so ``save -> load`` of a freshly loaded cube is
bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .cube import HsiCube

__all__ = [
    "PatchSpec",
    "SynthConfig",
    "extract_patches",
    "grid_positions",
    "synth_cube",
    "load_cube",
    "save_cube",
    "save_composite_png",
]

HSIC_MAGIC = b"HSIC"
HSIC_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


# ---------------------------------------------------------------------------
# Patch extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatchSpec:
    """Square patch tiling: ``patch_size`` pixels advancing by ``patch_size - overlap``."""

    patch_size: int
    overlap: int

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if not 0 <= self.overlap < self.patch_size:
            raise ValueError(
                f"overlap must satisfy 0 <= overlap < patch_size, got "
                f"overlap={self.overlap} with patch_size={self.patch_size}"
            )


def grid_positions(extent: int, patch_size: int, stride: int) -> list[int]:
    """Start offsets tiling ``[0, extent)``, with the last anchored to the far edge.

    Regular positions advance by ``stride``; if they do not reach the end, a
    final position at ``extent - patch_size`` is appended so the remainder is
    covered by a full-size patch.
    """
    positions = list(range(0, extent - patch_size + 1, stride))
    last = extent - patch_size
    if positions[-1] != last:
        positions.append(last)
    return positions


def extract_patches(cube: HsiCube, spec: PatchSpec) -> list[HsiCube]:
    """Cut a cube into overlapping full-band square patches.

    Patches appear in row-major grid order.  Every patch has the full
    ``patch_size`` extent; a trailing remainder produces one extra patch
    flush with the image edge rather than a thin one.
    """
    if spec.patch_size > min(cube.height, cube.width):
        raise ValueError(
            f"patch_size {spec.patch_size} exceeds image extent "
            f"{cube.height}x{cube.width}"
        )
    stride = spec.patch_size - spec.overlap
    ys = grid_positions(cube.height, spec.patch_size, stride)
    xs = grid_positions(cube.width, spec.patch_size, stride)
    return [
        HsiCube(cube.data[:, y : y + spec.patch_size, x : x + spec.patch_size].copy())
        for y in ys
        for x in xs
    ]


# ---------------------------------------------------------------------------
# Synthetic cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a random low-spectral-rank cube.

    ``n_endmembers`` smooth random spectra are mixed by smooth random
    abundance maps (a softmax over per-endmember fields, so abundances are
    positive and sum to 1 at each pixel), plus mild Gaussian noise, clipped
    to ``[0, 1]``.  ``smoothness`` is the spatial Gaussian sigma in pixels;
    larger values give blander images.  ``edge_sharpness`` scales the fields
    before the softmax: higher values turn the soft mixtures into near-flat
    plateaus separated by crisp material boundaries.

    With the default spectra, individual bands can come out nearly flat when
    all endmembers happen to share a similar value there.  Setting
    ``band_contrast`` rescales the endmember spectra at every band so the
    endmember spread (max minus min) equals that value, centred on 0.5,
    guaranteeing every band carries the same signal swing.  The rescale is a
    positive per-band affine map, so inter-band correlation is unaffected.

    ``field_band`` switches the spatial shaping of the abundance fields from
    Gaussian smoothing to an ideal ring filter: only spatial frequencies with
    radius inside ``(low, high)`` cycles per pixel survive (0.5 is the
    sampling limit).  This concentrates all boundary detail in a known
    frequency range, which is useful for resolution experiments where
    content above a downsampler's passband would otherwise alias.
    ``smoothness`` only applies to the Gaussian mode and is ignored here.
    """

    bands: int
    height: int
    width: int
    smoothness: float = 2.0
    n_endmembers: int = 4
    noise: float = 0.003
    edge_sharpness: float = 4.0
    band_contrast: float | None = None
    field_band: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.bands, self.height, self.width) < 1:
            raise ValueError("bands, height, and width must all be >= 1")
        if not 1 <= self.n_endmembers <= self.bands:
            raise ValueError(
                f"n_endmembers must lie in [1, bands], got {self.n_endmembers} "
                f"with {self.bands} bands"
            )
        if self.smoothness <= 0:
            raise ValueError(f"smoothness must be positive, got {self.smoothness}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.edge_sharpness <= 0:
            raise ValueError(f"edge_sharpness must be positive, got {self.edge_sharpness}")
        if self.band_contrast is not None and not 0 < self.band_contrast <= 1:
            raise ValueError(
                f"band_contrast must lie in (0, 1] when set, got {self.band_contrast}"
            )
        if self.field_band is not None:
            low, high = self.field_band
            if not 0 < low <= high <= 0.5:
                raise ValueError(
                    f"field_band must satisfy 0 < low <= high <= 0.5, got {self.field_band}"
                )


def _gaussian_smooth(arr: np.ndarray, sigma: float, axes: tuple[int, ...]) -> np.ndarray:
    """Separable Gaussian filtering with reflective padding."""
    radius = max(1, int(np.ceil(3.0 * sigma)))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    for axis in axes:
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (radius, radius)
        padded = np.pad(arr, pad, mode="reflect")
        windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.size, axis=axis)
        arr = np.tensordot(windows, kernel, axes=([-1], [0]))
    return arr


def _ring_filter(arr: np.ndarray, band: tuple[float, float]) -> np.ndarray:
    """Keep only spatial frequencies whose radius lies inside ``band``."""
    low, high = band
    fy = np.fft.fftfreq(arr.shape[-2])[:, None]
    fx = np.fft.fftfreq(arr.shape[-1])[None, :]
    mask = (np.hypot(fy, fx) >= low) & (np.hypot(fy, fx) <= high)
    if not mask.any():
        raise ValueError(
            f"field_band {band} keeps no spatial frequencies at extent "
            f"{arr.shape[-2]}x{arr.shape[-1]}"
        )
    return np.fft.ifft2(np.fft.fft2(arr, axes=(-2, -1)) * mask, axes=(-2, -1)).real


def synth_cube(cfg: SynthConfig) -> HsiCube:
    """Generate a deterministic random cube with strong inter-band correlation."""
    rng = np.random.default_rng(cfg.seed)

    # Smooth positive spectra, one per endmember, scaled into [0.1, 0.9].
    spectra = rng.standard_normal((cfg.n_endmembers, cfg.bands))
    spectra = _gaussian_smooth(spectra, max(1.0, cfg.bands / 8.0), axes=(1,))
    if cfg.band_contrast is None:
        lo = spectra.min(axis=1, keepdims=True)
        hi = spectra.max(axis=1, keepdims=True)
        spectra = 0.1 + 0.8 * (spectra - lo) / np.maximum(hi - lo, 1e-12)
    else:
        # Equalise the endmember spread at every band: centre on 0.5 and
        # stretch so max-min == band_contrast, keeping the spread positive so
        # inter-band correlations are untouched.
        centre = spectra.mean(axis=0, keepdims=True)
        spread = spectra.max(axis=0, keepdims=True) - spectra.min(axis=0, keepdims=True)
        spectra = 0.5 + (spectra - centre) * (cfg.band_contrast / np.maximum(spread, 1e-12))

    # Abundance fields: spatially shaped noise, sharpened and
    # softmax-normalised per pixel.
    fields = rng.standard_normal((cfg.n_endmembers, cfg.height, cfg.width))
    if cfg.field_band is None:
        fields = _gaussian_smooth(fields, cfg.smoothness, axes=(1, 2))
    else:
        fields = _ring_filter(fields, cfg.field_band)
    fields *= cfg.edge_sharpness / max(np.std(fields), 1e-12)  # sharpen mixture boundaries
    fields -= fields.max(axis=0, keepdims=True)
    abundance = np.exp(fields)
    abundance /= abundance.sum(axis=0, keepdims=True)

    cube = np.einsum("eb,ehw->bhw", spectra, abundance)
    if cfg.noise > 0:
        cube = cube + rng.normal(0.0, cfg.noise, size=cube.shape)
    return HsiCube(np.clip(cube, 0.0, 1.0))


# ---------------------------------------------------------------------------
# HSIC file I/O
# ---------------------------------------------------------------------------


def _check_unit_range(arr: np.ndarray, what: str) -> None:
    bad = (arr < 0.0) | (arr > 1.0)
    if bad.any():
        band, y, x = np.argwhere(bad)[0]
        raise ValueError(
            f"{what} value {arr[band, y, x]!r} at band {band}, row {y}, column {x} "
            f"is outside [0, 1]"
        )


def save_cube(cube: HsiCube, path: str | Path) -> None:
    """Write a cube to an HSIC file (samples narrowed to float32)."""
    _check_unit_range(cube.data, "cube")
    header = _HEADER.pack(HSIC_MAGIC, HSIC_VERSION, cube.bands, cube.height, cube.width)
    payload = np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_cube(path: str | Path) -> HsiCube:
    """Read an HSIC file back into a float64 cube."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, bands, height, width = _HEADER.unpack_from(raw)
    if magic != HSIC_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {HSIC_MAGIC!r}")
    if version != HSIC_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 4 * bands * height * width
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload size mismatch — header declares {bands}x{height}x{width} "
            f"({expected} bytes total) but file has {len(raw)} bytes"
        )
    samples = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    arr = samples.reshape(bands, height, width).astype(np.float64)
    _check_unit_range(arr, f"{path}: loaded")
    return HsiCube(arr)


# ---------------------------------------------------------------------------
# PNG export
# ---------------------------------------------------------------------------


def save_composite_png(cube: HsiCube, path: str | Path, band_indices: tuple[int, int, int]) -> None:
    """Render three bands as an RGB composite for visual inspection."""
    if len(band_indices) != 3:
        raise ValueError(f"need exactly 3 band indices (R, G, B), got {band_indices}")
    for b in band_indices:
        if not 0 <= b < cube.bands:
            raise ValueError(f"band index {b} out of range [0, {cube.bands})")
    stacked = np.stack([cube.data[b] for b in band_indices], axis=-1)
    pixels = np.round(np.clip(stacked, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels, mode="RGB").save(Path(path), format="PNG")
