"""Overlapping band grouping for spectral divide-and-conquer processing.

A cube's channel axis is carved into ``group_size``-wide intervals advancing
by ``group_size - overlap`` bands.  The number of groups is

    S = ceil((C - overlap) / (group_size - overlap))

and, rather than letting a short remainder produce a thin group, the last
interval is anchored to the end of the axis as ``[C - group_size, C)``.  All
groups therefore have exactly ``group_size`` bands (when ``C >=
group_size``), at the cost of the tail groups overlapping more deeply.
Merging averages every band over the groups that contain it, which makes
``merge_overlap_average(split(x)) == x`` an exact identity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cube import HsiCube
from .tensor import Tensor, accumulate_grad, custom_op

__all__ = ["GroupingScheme", "plan_groups", "split", "merge_overlap_average"]


@dataclass(frozen=True)
class GroupingScheme:
    """A fixed partition of ``total_bands`` channels into overlapping groups.

    ``intervals`` holds half-open ``(start, stop)`` band ranges in ascending
    start order; consecutive intervals overlap by at least ``overlap`` bands.
    """

    total_bands: int
    group_size: int
    overlap: int
    intervals: tuple[tuple[int, int], ...]

    @property
    def group_count(self) -> int:
        return len(self.intervals)

    def coverage_counts(self) -> np.ndarray:
        """How many groups contain each band (all entries >= 1)."""
        counts = np.zeros(self.total_bands, dtype=np.int64)
        for start, stop in self.intervals:
            counts[start:stop] += 1
        return counts


def plan_groups(total_bands: int, group_size: int, overlap: int) -> GroupingScheme:
    """Plan the overlapping band intervals covering ``total_bands`` channels.

    Strides advance by ``group_size - overlap``; the final interval is pulled
    back so it ends exactly at the last band.  ``group_size`` larger than the
    band count degrades to a single full-width group (with a warning, since
    the request could not be honoured literally).
    """
    if total_bands < 1:
        raise ValueError(f"total_bands must be >= 1, got {total_bands}")
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    if overlap < 0:
        raise ValueError(f"overlap must be >= 0, got {overlap}")
    if overlap >= group_size:
        raise ValueError(
            f"overlap must be smaller than group_size, got overlap={overlap} "
            f"with group_size={group_size}"
        )
    if group_size > total_bands:
        warnings.warn(
            f"group_size {group_size} exceeds the {total_bands} available bands; "
            "using a single full-width group",
            stacklevel=2,
        )
        group_size = total_bands
        overlap = min(overlap, group_size - 1)

    stride = group_size - overlap
    count = math.ceil((total_bands - overlap) / stride)
    starts = [k * stride for k in range(count - 1)]
    starts.append(total_bands - group_size)  # anchor the last group to the end
    intervals = tuple((s, s + group_size) for s in starts)
    return GroupingScheme(
        total_bands=total_bands, group_size=group_size, overlap=overlap, intervals=intervals
    )


def _as_batch(x: Tensor | HsiCube) -> Tensor:
    if isinstance(x, HsiCube):
        return x.to_batch()
    return x


def split(x: Tensor | HsiCube, scheme: GroupingScheme) -> list[Tensor]:
    """Slice a ``[N, C, H, W]`` batch into per-group channel blocks.

    Accepts an :class:`HsiCube` for convenience (treated as a batch of one).
    Slicing participates in the autodiff graph, so gradients flow back into
    the source tensor, with overlapped bands receiving contributions from
    every group that reads them.
    """
    t = _as_batch(x)
    if t.ndim != 4:
        raise ValueError(f"split expects a 4-D [N, C, H, W] tensor, got shape {t.shape}")
    if t.shape[1] != scheme.total_bands:
        raise ValueError(
            f"split channel mismatch: tensor has {t.shape[1]} bands, "
            f"scheme covers {scheme.total_bands}"
        )
    return [t[:, start:stop] for start, stop in scheme.intervals]


def merge_overlap_average(parts: list[Tensor], scheme: GroupingScheme) -> Tensor:
    """Reassemble group blocks into a full cube, averaging overlapped bands.

    Each output band is the mean of that band's copies across all groups
    containing it.  The mean is accumulated incrementally (``m += (x - m) / k``
    for the k-th copy), which leaves identical copies untouched bit for bit —
    so merging the unmodified output of :func:`split` returns the original
    tensor exactly.  The backward pass routes ``g / count`` back to each
    contributing slice.
    """
    if len(parts) != scheme.group_count:
        raise ValueError(
            f"merge expects {scheme.group_count} group blocks, got {len(parts)}"
        )
    first = parts[0]
    n, _, h, w = first.shape
    for t, (start, stop) in zip(parts, scheme.intervals):
        if t.ndim != 4 or t.shape != (n, stop - start, h, w):
            raise ValueError(
                f"group block for bands [{start}, {stop}) should have shape "
                f"{(n, stop - start, h, w)}, got {t.shape}"
            )

    counts = scheme.coverage_counts().astype(np.float64)
    seen = np.zeros(scheme.total_bands)
    out = np.zeros((n, scheme.total_bands, h, w))
    for t, (start, stop) in zip(parts, scheme.intervals):
        seen[start:stop] += 1.0
        block = out[:, start:stop]
        block += (t.data - block) / seen[start:stop][None, :, None, None]

    def backward_fn(g: np.ndarray) -> None:
        weighted = g / counts[None, :, None, None]
        for t, (start, stop) in zip(parts, scheme.intervals):
            accumulate_grad(t, weighted[:, start:stop])

    return custom_op(out, "merge_overlap_average", tuple(parts), backward_fn)
