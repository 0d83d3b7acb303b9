"""Stage-one image preparation.

Four steps run before clustering: local mean/variance normalization, an
adaptive spatial Wiener denoiser, mid-range intensity stretching, and
quantization onto the discrete level grid whose size fixes the starting
cluster count. All windowed statistics use replicated borders so the edges
do not grow dark halos that would seed spurious clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .imagecore import GrayImage

__all__ = [
    "AdjustSpec",
    "QuantizedImage",
    "normalize_local",
    "wiener_denoise",
    "adjust_midrange",
    "quantize_levels",
]

_VAR_EPS = 1e-12


@dataclass(frozen=True)
class AdjustSpec:
    """Intensity remap window: [l_in, h_in] -> [l_out, h_out], plus the
    quantization increment used afterwards."""

    l_in: float = 0.0
    h_in: float = 1.0
    l_out: float = 0.2
    h_out: float = 0.6
    step: float = 0.1

    def __post_init__(self):
        for name in ("l_in", "h_in", "l_out", "h_out", "step"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if not (0.0 <= self.l_in < self.h_in <= 1.0):
            raise ValueError(f"need 0 <= l_in < h_in <= 1, got [{self.l_in}, {self.h_in}]")
        if not (0.0 <= self.l_out < self.h_out <= 1.0):
            raise ValueError(f"need 0 <= l_out < h_out <= 1, got [{self.l_out}, {self.h_out}]")
        if not (0.0 < self.step <= self.h_out - self.l_out):
            raise ValueError(f"need 0 < step <= h_out - l_out, got step={self.step}")

    @property
    def level_count(self) -> int:
        """Number of grid values in {l_out, l_out+step, ..., h_out}."""
        return int(round((self.h_out - self.l_out) / self.step)) + 1

    def levels(self) -> np.ndarray:
        """The quantization grid, strictly increasing."""
        return self.l_out + self.step * np.arange(self.level_count, dtype=np.float64)


@dataclass(frozen=True)
class QuantizedImage:
    """GrayImage whose pixels take only the listed level values."""

    image: GrayImage
    levels: tuple[float, ...]

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        if lv.ndim != 1 or lv.size < 1:
            raise ValueError("levels must be a non-empty 1-D sequence")
        if np.any(np.diff(lv) <= 0):
            raise ValueError("levels must be strictly increasing")
        if not np.isin(self.image.pixels, lv).all():
            raise ValueError("every pixel must equal one of the level values exactly")
        object.__setattr__(self, "levels", tuple(float(v) for v in lv))

    @property
    def k(self) -> int:
        return len(self.levels)


def _check_window(window: int, shape: tuple[int, int]) -> None:
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if window > shape[0] or window > shape[1]:
        raise ValueError(f"window {window} larger than image {shape[1]}x{shape[0]}")


def _local_stats(pixels: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Windowed mean and variance with replicated borders.

    Variance comes from E[x^2] - E[x]^2 and is clipped at zero because the
    difference can go a few ulp negative on constant regions.
    """
    mean = uniform_filter(pixels, size=window, mode="nearest")
    mean_sq = uniform_filter(pixels * pixels, size=window, mode="nearest")
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return mean, var


def normalize_local(
    img: GrayImage, window: int = 15, target_mean: float = 0.5, target_var: float = 0.02
) -> GrayImage:
    """Map each pixel to target_mean + (x - mu) * sqrt(target_var / var).

    mu and var are the statistics of the window centered on the pixel.
    Pixels whose window has zero variance output target_mean; everything is
    clamped back to [0, 1].
    """
    if target_var <= 0:
        raise ValueError(f"target_var must be positive, got {target_var}")
    _check_window(window, img.shape)
    mean, var = _local_stats(img.pixels, window)
    gain = np.where(var > _VAR_EPS, np.sqrt(target_var / np.maximum(var, _VAR_EPS)), 0.0)
    out = target_mean + (img.pixels - mean) * gain
    return GrayImage(np.clip(out, 0.0, 1.0))


def wiener_denoise(img: GrayImage, window: int = 3) -> GrayImage:
    """Adaptive local Wiener filter with the noise power estimated from data.

    output = mu + max(var - nu2, 0) / max(var, eps) * (x - mu), where mu and
    var are window statistics and nu2 is the mean of all local variances.
    Smooth regions collapse to their window mean; high-variance structure is
    left nearly untouched.
    """
    _check_window(window, img.shape)
    mean, var = _local_stats(img.pixels, window)
    noise = float(var.mean())
    gain = np.maximum(var - noise, 0.0) / np.maximum(var, _VAR_EPS)
    out = mean + gain * (img.pixels - mean)
    return GrayImage(np.clip(out, 0.0, 1.0))


def adjust_midrange(img: GrayImage, spec: AdjustSpec = AdjustSpec()) -> GrayImage:
    """Linear stretch of [l_in, h_in] onto [l_out, h_out], clamped outside.

    out = l_out + (h_out - l_out) * (clamp(x, l_in, h_in) - l_in) / (h_in - l_in)
    """
    x = np.clip(img.pixels, spec.l_in, spec.h_in)
    scale = (spec.h_out - spec.l_out) / (spec.h_in - spec.l_in)
    out = spec.l_out + scale * (x - spec.l_in)
    # The affine map keeps values inside [l_out, h_out] up to rounding.
    return GrayImage(np.clip(out, spec.l_out, spec.h_out))


def quantize_levels(img: GrayImage, spec: AdjustSpec = AdjustSpec()) -> QuantizedImage:
    """Snap every pixel to the nearest value of the spec's level grid.

    Exact halfway ties snap to the lower level. Expects adjust_midrange to
    have run first (pixels already inside [l_out, h_out]); out-of-window
    values are clipped to the nearest end of the grid.
    """
    levels = spec.levels()
    t = (img.pixels - spec.l_out) / spec.step
    idx = np.ceil(t - 0.5).astype(np.int64)  # half-down rounding
    idx = np.clip(idx, 0, len(levels) - 1)
    return QuantizedImage(GrayImage(levels[idx]), tuple(levels))
