"""Gradient, orientation, and frequency analysis on block grids.

Vein ridges are locally parallel, so their geometry is summarized per
square block: a dominant direction from the gradient structure tensor and
a ridge frequency from the intensity signature perpendicular to that
direction.  Angles are radians in [0, pi) measured from the column axis
and describe the *ridge* direction (along the vein), not the gradient.

Blocks tile the image from the top-left corner; edge blocks may be
partial.  A grid for an HxW image with block size w has
ceil(H/w) x ceil(W/w) entries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import GrayImage

__all__ = [
    "GradientPair",
    "OrientationField",
    "FrequencyMap",
    "sobel_gradients",
    "grad_magnitude",
    "grad_magnitude_l1",
    "estimate_orientation",
    "estimate_frequency",
    "field_to_csv",
]

_FREQ_MIN = 1.0 / 25.0
_FREQ_MAX = 1.0 / 3.0
_TINY = 1e-12

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class GradientPair:
    """Horizontal (gx, along columns) and vertical (gy, along rows) responses."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self) -> None:
        gx = np.asarray(self.gx, dtype=np.float64)
        gy = np.asarray(self.gy, dtype=np.float64)
        if gx.shape != gy.shape or gx.ndim != 2:
            raise ValueError("gradient components must be matching 2-D arrays")
        for name, arr in (("gx", gx), ("gy", gy)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape


@dataclass(frozen=True)
class OrientationField:
    """Per-block ridge angle in [0, pi) and coherence in [0, 1]."""

    block_size: int
    angles: np.ndarray
    coherence: np.ndarray

    def __post_init__(self) -> None:
        if self.block_size < 4:
            raise ValueError(f"block size must be >= 4, got {self.block_size}")
        angles = np.asarray(self.angles, dtype=np.float64)
        coh = np.asarray(self.coherence, dtype=np.float64)
        if angles.shape != coh.shape or angles.ndim != 2:
            raise ValueError("angle and coherence grids must be matching 2-D arrays")
        if angles.size and (angles.min() < 0.0 or angles.max() >= math.pi):
            raise ValueError("angles must lie in [0, pi)")
        if coh.size and (coh.min() < 0.0 or coh.max() > 1.0 + 1e-9):
            raise ValueError("coherence must lie in [0, 1]")
        for name, arr in (("angles", angles), ("coherence", coh)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.angles.shape


@dataclass(frozen=True)
class FrequencyMap:
    """Per-block ridge frequency (cycles/pixel); 0 where no valid estimate."""

    block_size: int
    freqs: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        freqs = np.asarray(self.freqs, dtype=np.float64)
        valid = np.asarray(self.valid).astype(bool)
        if freqs.shape != valid.shape or freqs.ndim != 2:
            raise ValueError("frequency and validity grids must be matching 2-D arrays")
        good = freqs[valid]
        if good.size and (good.min() < _FREQ_MIN - _TINY or good.max() > _FREQ_MAX + _TINY):
            raise ValueError("valid frequencies must lie in [1/25, 1/3]")
        bad = freqs[~valid]
        if bad.size and np.any(bad != 0.0):
            raise ValueError("invalid blocks must carry frequency 0")
        for name, arr in (("freqs", freqs), ("valid", valid)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.freqs.shape


def sobel_gradients(img: GrayImage) -> GradientPair:
    """3x3 Sobel responses with replicated borders.

    ``gx`` responds to intensity increasing along columns (left to right),
    ``gy`` along rows (top to bottom).
    """
    if img.height < 3 or img.width < 3:
        raise ValueError(f"image must be at least 3x3 for Sobel, got {img.shape}")
    gx = ndimage.correlate(img.pixels, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img.pixels, _SOBEL_Y, mode="nearest")
    return GradientPair(gx=gx, gy=gy)


def grad_magnitude(pair: GradientPair) -> np.ndarray:
    """Euclidean gradient magnitude per pixel."""
    return np.hypot(pair.gx, pair.gy)


def grad_magnitude_l1(pair: GradientPair) -> np.ndarray:
    """Cheaper |gx| + |gy| magnitude approximation."""
    return np.abs(pair.gx) + np.abs(pair.gy)


def _block_grid(h: int, w: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    return np.arange(0, h, size), np.arange(0, w, size)


def _block_sum(arr: np.ndarray, size: int) -> np.ndarray:
    """Sum over the block tiling (edge blocks partial)."""
    row_starts, col_starts = _block_grid(arr.shape[0], arr.shape[1], size)
    return np.add.reduceat(np.add.reduceat(arr, row_starts, axis=0), col_starts, axis=1)


def estimate_orientation(img: GrayImage, block_size: int = 16) -> OrientationField:
    """Dominant ridge direction and coherence per block.

    Classic structure-tensor averaging: for each block the doubled-angle
    vector (Gxx - Gyy, 2 Gxy) of Sobel gradients is formed, smoothed over
    the 3x3 block neighbourhood to stabilize noisy blocks, then halved
    back into an angle.  The gradient direction is rotated a quarter turn
    so the reported angle runs along the ridge.  Coherence is the usual
    anisotropy ratio: 1 for perfectly parallel structure, 0 for isotropic
    or empty blocks.
    """
    if block_size < 4:
        raise ValueError(f"block size must be >= 4, got {block_size}")
    if img.height < block_size or img.width < block_size:
        raise ValueError(
            f"image {img.shape} smaller than one {block_size}x{block_size} block"
        )
    grads = sobel_gradients(img)
    gxx = _block_sum(grads.gx * grads.gx, block_size)
    gyy = _block_sum(grads.gy * grads.gy, block_size)
    gxy = _block_sum(grads.gx * grads.gy, block_size)

    vx = 2.0 * gxy
    vy = gxx - gyy
    energy = gxx + gyy
    norm = np.hypot(vx, vy)
    coherence = np.where(energy > _TINY, norm / np.maximum(energy, _TINY), 0.0)

    # Smooth the doubled-angle unit vectors, not the angles, so the pi
    # wrap-around never averages 179 degrees with 1 degree incorrectly.
    cos2 = np.where(norm > _TINY, vy / np.maximum(norm, _TINY), 0.0)
    sin2 = np.where(norm > _TINY, vx / np.maximum(norm, _TINY), 0.0)
    cos2 = ndimage.uniform_filter(cos2, size=3, mode="nearest")
    sin2 = ndimage.uniform_filter(sin2, size=3, mode="nearest")

    gradient_angle = 0.5 * np.arctan2(sin2, cos2)
    ridge = np.mod(gradient_angle + math.pi / 2.0, math.pi)
    # Zero-gradient blocks stay pinned at angle 0 / coherence 0 no matter
    # what their neighbours contribute through the smoothing.
    angles = np.where(energy > _TINY, ridge, 0.0)
    # np.mod can land exactly on pi; the invariant is the half-open range
    angles = np.where(angles >= math.pi, 0.0, angles)
    return OrientationField(
        block_size=block_size,
        angles=angles,
        coherence=np.clip(coherence, 0.0, 1.0),
    )


def estimate_frequency(
    img: GrayImage,
    field: OrientationField,
    block_size: int = 16,
    window_len: int = 32,
) -> FrequencyMap:
    """Ridge frequency per block from the oriented intensity signature.

    For each coherent block an oriented window (``block_size`` samples
    along the ridge by ``window_len`` across it) is resampled around the
    block center with bilinear interpolation; averaging along the ridge
    collapses it to a 1-D signature across the ridges.  Peaks of the
    lightly smoothed signature (strict local maxima above its mean, flat
    tops counting once at their center) mark successive ridges; the mean
    peak spacing gives the period.  Blocks
    whose estimate falls outside the plausible ridge-period band [3, 25]
    pixels -- or with fewer than two peaks, or zero coherence -- are
    marked invalid with frequency 0.
    """
    if field.block_size != block_size:
        raise ValueError(
            f"orientation field was built with block size {field.block_size}, "
            f"frequency asked for {block_size}"
        )
    if window_len < 2 * block_size:
        raise ValueError(
            f"window length must be >= 2x block size, got {window_len} < {2 * block_size}"
        )
    nrows, ncols = field.grid_shape
    expect = (math.ceil(img.height / block_size), math.ceil(img.width / block_size))
    if (nrows, ncols) != expect:
        raise ValueError(
            f"orientation grid {field.grid_shape} does not cover image {img.shape}"
        )

    w = block_size
    along = np.arange(w, dtype=np.float64) - w / 2.0
    across = np.arange(window_len, dtype=np.float64) - window_len / 2.0

    freqs = np.zeros((nrows, ncols), dtype=np.float64)
    valid = np.zeros((nrows, ncols), dtype=bool)
    for bi in range(nrows):
        r0 = bi * w
        ci = (r0 + min(r0 + w, img.height) - 1) / 2.0
        for bj in range(ncols):
            if field.coherence[bi, bj] <= 0.0:
                continue
            c0 = bj * w
            cj = (c0 + min(c0 + w, img.width) - 1) / 2.0
            theta = float(field.angles[bi, bj])
            sin_t, cos_t = math.sin(theta), math.cos(theta)
            rows = ci + along[:, None] * sin_t + across[None, :] * cos_t
            cols = cj + along[:, None] * cos_t - across[None, :] * sin_t
            window = ndimage.map_coordinates(
                img.pixels, [rows, cols], order=1, mode="nearest"
            )
            signature = window.mean(axis=0)
            smooth = ndimage.uniform_filter1d(signature, size=3, mode="nearest")
            peaks = _signature_peaks(smooth)
            if peaks.size < 2:
                continue
            period = (peaks[-1] - peaks[0]) / (peaks.size - 1)
            freq = 1.0 / period
            if _FREQ_MIN <= freq <= _FREQ_MAX:
                freqs[bi, bj] = freq
                valid[bi, bj] = True
    return FrequencyMap(block_size=block_size, freqs=freqs, valid=valid)


def _signature_peaks(x: np.ndarray) -> np.ndarray:
    """Positions of strict interior local maxima that rise above the mean.

    A flat-topped maximum -- a run of equal samples strictly above both
    flanks -- counts once, at the run center, so a crest sampled exactly
    halfway between grid points is not silently dropped.  Positions are
    therefore fractional for even-length plateaus.
    """
    n = x.size
    if n < 3:
        return np.empty(0, dtype=np.float64)
    mean = x.mean()
    peaks = []
    i = 1
    while i < n - 1:
        if x[i] <= x[i - 1]:
            i += 1
            continue
        j = i
        while j + 1 < n and x[j + 1] == x[j]:
            j += 1
        if j < n - 1 and x[j + 1] < x[j] and x[i] > mean:
            peaks.append(0.5 * (i + j))
        i = j + 1
    return np.asarray(peaks, dtype=np.float64)


def field_to_csv(
    field: OrientationField, path: str, fmap: FrequencyMap | None = None
) -> None:
    """One CSV row per block: position, angle, coherence, frequency, validity.

    Frequency columns are left blank when no map is supplied.
    """
    if fmap is not None and fmap.grid_shape != field.grid_shape:
        raise ValueError(
            f"frequency grid {fmap.grid_shape} does not match orientation "
            f"grid {field.grid_shape}"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["block_row", "block_col", "angle_rad", "coherence", "freq", "valid"]
        )
        nrows, ncols = field.grid_shape
        for bi in range(nrows):
            for bj in range(ncols):
                row: list[object] = [
                    bi,
                    bj,
                    repr(float(field.angles[bi, bj])),
                    repr(float(field.coherence[bi, bj])),
                ]
                if fmap is None:
                    row += ["", ""]
                else:
                    row += [
                        repr(float(fmap.freqs[bi, bj])),
                        int(fmap.valid[bi, bj]),
                    ]
                writer.writerow(row)
