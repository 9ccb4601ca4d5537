"""Reconstruction quality indices for hyperspectral cubes.

Six measures are provided, each taking the reference cube first:

========  ==================================================================
``cc``    mean over bands of the Pearson correlation between band images
``sam``   mean over pixels of the spectral angle (degrees) between the
          per-pixel band vectors
``rmse``  root mean squared error over all voxels
``ergas`` relative dimensionless global error:
          ``100/d * sqrt(mean_b((rmse_b / mean_b)^2))`` for scale ``d``
``psnr``  mean over bands of per-band peak SNR in dB (data range 1),
          capped at 100 dB when a band's MSE underflows 1e-10
``ssim``  mean over bands of per-band structural similarity (11x11
          Gaussian window, sigma 1.5, valid placements only)
========  ==================================================================

A perfect reconstruction scores exactly ``(1, 0, 0, 0, 100, 1)``: the
implementations test bitwise equality per band/pixel so no floating-point
residue leaks into the ideal case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cube import HsiCube

__all__ = [
    "MetricReport",
    "cc",
    "sam",
    "rmse",
    "ergas",
    "psnr",
    "ssim",
    "evaluate_all",
    "CSV_HEADER",
]

PSNR_CAP_DB = 100.0
PSNR_MSE_FLOOR = 1e-10
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_EPS = 1e-12

CSV_HEADER = "cube_id,scale,cc,sam,rmse,ergas,psnr,ssim"


def _as_cube_array(x: HsiCube | np.ndarray, name: str) -> np.ndarray:
    arr = x.data if isinstance(x, HsiCube) else np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be a 3-D [bands, H, W] cube, got shape {arr.shape}")
    return arr.astype(np.float64, copy=False)


def _check_pair(reference, estimate) -> tuple[np.ndarray, np.ndarray]:
    ref = _as_cube_array(reference, "reference")
    est = _as_cube_array(estimate, "estimate")
    if ref.shape != est.shape:
        raise ValueError(f"cube shapes must match, got {ref.shape} and {est.shape}")
    return ref, est


# ---------------------------------------------------------------------------
# Individual metrics
# ---------------------------------------------------------------------------


def rmse(reference, estimate) -> float:
    """Root mean squared error over every voxel."""
    ref, est = _check_pair(reference, estimate)
    return float(np.sqrt(np.mean((ref - est) ** 2)))


def _psnr_per_band(ref: np.ndarray, est: np.ndarray) -> np.ndarray:
    mse = np.mean((ref - est) ** 2, axis=(1, 2))
    out = np.full(mse.shape, PSNR_CAP_DB)
    live = mse >= PSNR_MSE_FLOOR
    out[live] = 10.0 * np.log10(1.0 / mse[live])
    return out


def psnr(reference, estimate) -> float:
    """Mean over bands of per-band PSNR in dB (data range 1, cap 100)."""
    ref, est = _check_pair(reference, estimate)
    return float(np.mean(_psnr_per_band(ref, est)))


def sam(reference, estimate) -> float:
    """Mean spectral angle between per-pixel band vectors, in degrees.

    Identical pixel spectra score an exact 0; otherwise the cosine is taken
    with an epsilon-guarded denominator and clipped into ``[-1, 1]`` before
    ``arccos``.  The angle is invariant to positive per-pixel rescaling of
    either argument.
    """
    ref, est = _check_pair(reference, estimate)
    dot = np.sum(ref * est, axis=0)
    norms = np.sqrt(np.sum(ref * ref, axis=0)) * np.sqrt(np.sum(est * est, axis=0))
    cos = np.clip(dot / (norms + _EPS), -1.0, 1.0)
    angles = np.degrees(np.arccos(cos))
    angles[np.all(ref == est, axis=0)] = 0.0
    return float(np.mean(angles))


def _cc_per_band(ref: np.ndarray, est: np.ndarray) -> tuple[np.ndarray, list[int]]:
    bands = ref.shape[0]
    vals = np.empty(bands)
    flagged: list[int] = []
    for b in range(bands):
        x = ref[b].reshape(-1)
        y = est[b].reshape(-1)
        if np.array_equal(x, y):
            vals[b] = 1.0
            continue
        xc = x - x.mean()
        yc = y - y.mean()
        sxx = float(xc @ xc)
        syy = float(yc @ yc)
        if sxx == 0.0 or syy == 0.0:
            # A constant band has no variance to correlate against.
            vals[b] = 0.0
            flagged.append(b)
            continue
        vals[b] = float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))
    return vals, flagged


def cc(reference, estimate) -> float:
    """Mean over bands of the Pearson correlation between band images.

    Bands that are bitwise identical score exactly 1; a band that is
    constant on either side (zero variance) scores 0.
    """
    ref, est = _check_pair(reference, estimate)
    vals, _ = _cc_per_band(ref, est)
    return float(np.mean(vals))


def ergas(reference, estimate, scale: int) -> float:
    """Relative dimensionless global error of synthesis at scale ``scale``.

    Uses per-band RMSE normalised by the reference band mean; requires every
    reference band mean to be nonzero.
    """
    ref, est = _check_pair(reference, estimate)
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    band_mse = np.mean((ref - est) ** 2, axis=(1, 2))
    band_mean = np.mean(ref, axis=(1, 2))
    if np.any(band_mean == 0.0):
        bad = int(np.argwhere(band_mean == 0.0)[0, 0])
        raise ValueError(f"reference band {bad} has zero mean; its relative error is undefined")
    return float(100.0 / scale * np.sqrt(np.mean(band_mse / band_mean**2)))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    coords = np.arange(size, dtype=np.float64) - half
    one_d = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    win = np.outer(one_d, one_d)
    return win / win.sum()


def _ssim_band(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def windows(a: np.ndarray) -> np.ndarray:
        return np.lib.stride_tricks.sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW))

    def filt(a: np.ndarray) -> np.ndarray:
        return np.tensordot(windows(a), win, axes=([-2, -1], [0, 1]))

    mx = filt(x)
    my = filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cxy = filt(x * y) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(reference, estimate, data_range: float = 1.0) -> float:
    """Mean over bands of structural similarity (valid 11x11 windows only).

    Identical inputs score exactly 1: every window then has bitwise equal
    numerator and denominator.
    """
    ref, est = _check_pair(reference, estimate)
    if ref.shape[1] < SSIM_WINDOW or ref.shape[2] < SSIM_WINDOW:
        raise ValueError(
            f"ssim needs spatial extents of at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
            f"got {ref.shape[1]}x{ref.shape[2]}"
        )
    return float(np.mean([_ssim_band(ref[b], est[b], data_range) for b in range(ref.shape[0])]))


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    """All six quality indices for one reconstruction, plus diagnostics.

    ``constant_bands`` lists band indices whose correlation was undefined
    (zero variance on either side) and therefore scored 0.
    """

    cc: float
    sam: float
    rmse: float
    ergas: float
    psnr: float
    ssim: float
    constant_bands: tuple[int, ...] = ()

    def csv_row(self, cube_id: str, scale: int) -> str:
        """One CSV line in the fixed column order, six decimal places."""
        if "," in cube_id:
            raise ValueError(f"cube_id must not contain commas: {cube_id!r}")
        values = [self.cc, self.sam, self.rmse, self.ergas, self.psnr, self.ssim]
        return ",".join([cube_id, str(scale)] + [f"{v:.6f}" for v in values])


def evaluate_all(reference, estimate, scale: int) -> MetricReport:
    """Compute all six indices at once (reference first, like each metric)."""
    ref, est = _check_pair(reference, estimate)
    cc_vals, flagged = _cc_per_band(ref, est)
    return MetricReport(
        cc=float(np.mean(cc_vals)),
        sam=sam(ref, est),
        rmse=rmse(ref, est),
        ergas=ergas(ref, est, scale),
        psnr=psnr(ref, est),
        ssim=ssim(ref, est),
        constant_bands=tuple(flagged),
    )
