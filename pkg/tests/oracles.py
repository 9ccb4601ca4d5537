"""Independent reference implementations used to check the package.

Everything here is written in the most literal style possible — nested
Python loops and textbook formulas — and deliberately shares no code with
the package under test.  Slow is fine; obviously-correct is the point.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


def conv2d_loops(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, padding: int) -> np.ndarray:
    """Stride-1 zero-padded 2-D convolution, one scalar product at a time."""
    n, c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    h_out = h + 2 * padding - kh + 1
    w_out = w + 2 * padding - kw + 1
    out = np.zeros((n, c_out, h_out, w_out))
    for b in range(n):
        for o in range(c_out):
            for y in range(h_out):
                for xo in range(w_out):
                    acc = bias[o]
                    for c in range(c_in):
                        for i in range(kh):
                            for j in range(kw):
                                yy = y + i - padding
                                xx = xo + j - padding
                                if 0 <= yy < h and 0 <= xx < w:
                                    acc += x[b, c, yy, xx] * weight[o, c, i, j]
                    out[b, o, y, xo] = acc
    return out


def pixel_shuffle_loops(x: np.ndarray, r: int) -> np.ndarray:
    """Pixel shuffle by explicit index arithmetic."""
    n, c_r2, h, w = x.shape
    c = c_r2 // (r * r)
    out = np.zeros((n, c, h * r, w * r))
    for b in range(n):
        for ch in range(c):
            for y in range(h):
                for xo in range(w):
                    for i in range(r):
                        for j in range(r):
                            out[b, ch, y * r + i, xo * r + j] = x[b, ch * r * r + i * r + j, y, xo]
    return out


# ---------------------------------------------------------------------------
# Finite-difference gradients
# ---------------------------------------------------------------------------


def finite_difference(fn, arr: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``fn(arr)`` w.r.t. every element.

    ``fn`` must be a pure function of the array values (graph recording is
    the caller's responsibility to disable).
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = fn(arr)
        flat[i] = orig - step
        f_minus = fn(arr)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative disagreement between two gradient estimates."""
    diff = np.max(np.abs(analytic - numeric))
    denom = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    return float(diff / denom)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def l1_loops(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute error, accumulated element by element."""
    total = 0.0
    count = 0
    for v, t in zip(pred.reshape(-1), target.reshape(-1)):
        total += abs(v - t)
        count += 1
    return total / count


def sstv_loops(pred: np.ndarray, per_site: bool = True) -> float:
    """Spatial-spectral total variation of a ``[N, C, H, W]`` batch.

    Sums absolute forward differences along height, width, and channel
    (no wrap-around), each term either averaged over its own difference
    count (``per_site``) or left as a raw sum divided by the batch size.
    """
    n, c, h, w = pred.shape
    sums = [0.0, 0.0, 0.0]
    counts = [0, 0, 0]
    for b in range(n):
        for ch in range(c):
            for y in range(h):
                for x in range(w):
                    if y + 1 < h:
                        sums[0] += abs(pred[b, ch, y + 1, x] - pred[b, ch, y, x])
                        counts[0] += 1
                    if x + 1 < w:
                        sums[1] += abs(pred[b, ch, y, x + 1] - pred[b, ch, y, x])
                        counts[1] += 1
                    if ch + 1 < c:
                        sums[2] += abs(pred[b, ch + 1, y, x] - pred[b, ch, y, x])
                        counts[2] += 1
    if per_site:
        return sum(s / cnt for s, cnt in zip(sums, counts) if cnt > 0)
    return sum(sums) / n


# ---------------------------------------------------------------------------
# Image-quality metrics
# ---------------------------------------------------------------------------


def rmse_loops(x: np.ndarray, y: np.ndarray) -> float:
    """Root mean squared error over every voxel."""
    total = 0.0
    for a, b in zip(x.reshape(-1), y.reshape(-1)):
        total += (a - b) ** 2
    return math.sqrt(total / x.size)


def psnr_loops(x: np.ndarray, y: np.ndarray, cap_db: float = 100.0) -> float:
    """Mean over bands of per-band peak signal-to-noise ratio (data range 1)."""
    bands = x.shape[0]
    vals = []
    for b in range(bands):
        mse = 0.0
        count = 0
        for a, c in zip(x[b].reshape(-1), y[b].reshape(-1)):
            mse += (a - c) ** 2
            count += 1
        mse /= count
        if mse < 1e-10:
            vals.append(cap_db)
        else:
            vals.append(10.0 * math.log10(1.0 / mse))
    return sum(vals) / bands


def sam_loops(x: np.ndarray, y: np.ndarray) -> float:
    """Mean spectral angle in degrees between per-pixel band vectors."""
    bands, h, w = x.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            dot = 0.0
            nx = 0.0
            ny = 0.0
            for b in range(bands):
                dot += x[b, i, j] * y[b, i, j]
                nx += x[b, i, j] ** 2
                ny += y[b, i, j] ** 2
            denom = math.sqrt(nx) * math.sqrt(ny)
            cosv = dot / (denom + 1e-12)
            cosv = min(1.0, max(-1.0, cosv))
            total += math.degrees(math.acos(cosv))
    return total / (h * w)


def cc_loops(x: np.ndarray, y: np.ndarray) -> float:
    """Mean over bands of the Pearson correlation between band images.

    A band with zero variance on either side is scored 0, matching the
    convention that a constant band carries no correlating structure.
    """
    bands = x.shape[0]
    vals = []
    for b in range(bands):
        xs = x[b].reshape(-1)
        ys = y[b].reshape(-1)
        mx = sum(xs) / xs.size
        my = sum(ys) / ys.size
        sxy = sxx = syy = 0.0
        for a, c in zip(xs, ys):
            sxy += (a - mx) * (c - my)
            sxx += (a - mx) ** 2
            syy += (c - my) ** 2
        if sxx == 0.0 or syy == 0.0:
            vals.append(0.0)
        else:
            vals.append(sxy / math.sqrt(sxx * syy))
    return sum(vals) / bands


def ergas_loops(reference: np.ndarray, estimate: np.ndarray, scale: int) -> float:
    """Dimensionless global relative error of synthesis for scale ``scale``."""
    bands = reference.shape[0]
    acc = 0.0
    for b in range(bands):
        mse = 0.0
        count = 0
        for r, e in zip(reference[b].reshape(-1), estimate[b].reshape(-1)):
            mse += (r - e) ** 2
            count += 1
        rmse_b = math.sqrt(mse / count)
        mean_b = sum(reference[b].reshape(-1)) / count
        acc += (rmse_b / mean_b) ** 2
    return (100.0 / scale) * math.sqrt(acc / bands)


def gaussian_window_loops(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalised 2-D Gaussian window."""
    half = size // 2
    win = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            win[i, j] = math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2.0 * sigma * sigma))
    return win / win.sum()


def ssim_band_loops(
    x: np.ndarray, y: np.ndarray, size: int = 11, sigma: float = 1.5, data_range: float = 1.0
) -> float:
    """Mean structural similarity of one band over valid window placements."""
    win = gaussian_window_loops(size, sigma)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i : i + size, j : j + size]
            py = y[i : i + size, j : j + size]
            mx = float((win * px).sum())
            my = float((win * py).sum())
            vx = float((win * px * px).sum()) - mx * mx
            vy = float((win * py * py).sum()) - my * my
            cxy = float((win * px * py).sum()) - mx * my
            num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            vals.append(num / den)
    return sum(vals) / len(vals)


def ssim_loops(x: np.ndarray, y: np.ndarray, data_range: float = 1.0) -> float:
    """Mean over bands of per-band structural similarity."""
    bands = x.shape[0]
    return sum(ssim_band_loops(x[b], y[b], data_range=data_range) for b in range(bands)) / bands
