"""Vein-line extraction: matched filtering, curvature scoring, cleanup.

The second optimization stage.  A smoothing kernel matched to the vein
cross-section suppresses texture, maximum-curvature scoring turns dark
ridges into a sparse score map, and the binary pattern is repaired with
orientation-guided morphological closing plus small-component removal.
:func:`extract_pattern` wires the whole pipeline together, including the
stage-one localization from :mod:`veinline.clustering`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .clustering import (
    cluster_fcm,
    cluster_kmeans,
    cluster_optimized,
    localize,
    threshold_otsu_double,
)
from .config import PipelineConfig
from .gpo import OrientationField, estimate_orientation
from .imagecore import BinaryMask, GrayImage
from .preprocess import (
    QuantizedImage,
    adjust_midrange,
    normalize_local,
    quantize_levels,
    wiener_denoise,
)

__all__ = [
    "Kernel",
    "gaussian_kernel",
    "matched_filter",
    "CurvatureScore",
    "max_curvature",
    "binarize_scores",
    "StructElem",
    "line_struct_elem",
    "close_oriented",
    "remove_small",
    "PretreatmentMask",
    "build_premask",
    "ExtractionStages",
    "extract_pattern",
    "extract_pattern_stages",
]


@dataclass(frozen=True)
class Kernel:
    """Square filter tap grid: odd size, non-negative, symmetric, unit sum."""

    size: int
    sigma: float
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.size}")
        if self.sigma <= 0.0:
            raise ValueError(f"kernel sigma must be positive, got {self.sigma}")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.size, self.size):
            raise ValueError(f"weights must be {self.size}x{self.size}, got {w.shape}")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite and non-negative")
        if not math.isclose(float(w.sum()), 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"kernel weights must sum to 1, got {w.sum()!r}")
        if not (np.allclose(w, w[::-1, :]) and np.allclose(w, w[:, ::-1])):
            raise ValueError("kernel must be symmetric under both axis flips")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def gaussian_kernel(sigma: float, size: int = 0) -> Kernel:
    """Normalized isotropic Gaussian taps.

    ``size=0`` picks the usual 2*ceil(3*sigma)+1 support so the tails are
    negligible; an explicit odd size truncates (and renormalizes) harder.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if size == 0:
        size = 2 * math.ceil(3.0 * sigma) + 1
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    offs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    profile = np.exp(-(offs * offs) / (2.0 * sigma * sigma))
    weights = profile[:, None] * profile[None, :]
    return Kernel(size=size, sigma=sigma, weights=weights / weights.sum())


def matched_filter(img: GrayImage, kernel: Kernel) -> GrayImage:
    """2-D convolution with replicated borders, clamped to [0, 1]."""
    if kernel.size > min(img.height, img.width):
        raise ValueError(
            f"kernel size {kernel.size} exceeds image extent {img.shape}"
        )
    out = ndimage.convolve(img.pixels, kernel.weights, mode="nearest")
    return GrayImage(np.clip(out, 0.0, 1.0))


@dataclass(frozen=True)
class CurvatureScore:
    """Non-negative per-pixel vein-likeness scores."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError("score map must be 2-D")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if s.size and s.min() < 0.0:
            raise ValueError("scores must be non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]


# Probe directions as (row step, col step) unit vectors with the integer
# pixel step used for scanning and connectivity.
_DIRECTIONS: tuple[tuple[float, float, int, int], ...] = (
    (0.0, 1.0, 0, 1),  # horizontal
    (1.0, 0.0, 1, 0),  # vertical
    (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 1, 1),  # main diagonal
    (-1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), -1, 1),  # anti diagonal
)


def _scan_lines(h: int, w: int, dr: int, dc: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index paths covering the image along one integer direction."""
    rows = np.arange(h)
    cols = np.arange(w)
    if (dr, dc) == (0, 1):
        return [(np.full(w, r), cols) for r in rows]
    if (dr, dc) == (1, 0):
        return [(rows, np.full(h, c)) for c in cols]
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    if (dr, dc) == (1, 1):
        paths = []
        for off in range(-(h - 1), w):
            paths.append((np.diagonal(rr, off), np.diagonal(cc, off)))
        return paths
    if (dr, dc) == (-1, 1):
        rrf, ccf = np.fliplr(rr), np.fliplr(cc)
        paths = []
        for off in range(-(h - 1), w):
            paths.append((np.diagonal(rrf, off), np.diagonal(ccf, off)))
        return paths
    raise ValueError(f"unsupported scan direction ({dr}, {dc})")


def _deposit_runs(kappa: np.ndarray, rows: np.ndarray, cols: np.ndarray, out: np.ndarray) -> None:
    """Score each positive-curvature run and drop it at the run's center.

    A run of consecutive positive curvatures along the scan line is one
    vein crossing; its score is (max curvature in run) * (run length),
    deposited at the center position of the run.
    """
    pos = kappa > 0.0
    if not pos.any():
        return
    padded = np.concatenate(([False], pos, [False]))
    edges = np.diff(padded.astype(np.int8))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    for s, e in zip(starts, ends):
        mid = s + (e - s - 1) // 2
        out[rows[mid], cols[mid]] += float(kappa[s:e].max()) * (e - s)


def _shift(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Translate with zero fill outside the frame."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    rs_src = slice(max(0, -dr), min(h, h - dr))
    cs_src = slice(max(0, -dc), min(w, w - dc))
    rs_dst = slice(max(0, dr), min(h, h + dr))
    cs_dst = slice(max(0, dc), min(w, w + dc))
    out[rs_dst, cs_dst] = arr[rs_src, cs_src]
    return out


def max_curvature(img: GrayImage, sigma: float = 2.5) -> CurvatureScore:
    """Maximum-curvature vein scoring over four probe directions.

    The image is treated as an intensity surface smoothed at scale
    ``sigma``; veins are valleys, i.e. cross-sections with positive
    second derivative.  Along each of four directions (horizontal,
    vertical, both diagonals) the normalized curvature

        k = d2P / (1 + dP^2)^(3/2)

    of every scan-line profile is computed from Gaussian-derivative
    responses; each positive run deposits (max curvature * run width) at
    the run maximum.  A final connectivity pass promotes positions whose
    neighbours two pixels out on both sides also scored, summing over the
    four directions -- isolated speckle finds no support and dies.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if img.height < 3 or img.width < 3:
        raise ValueError(f"image must be at least 3x3, got {img.shape}")
    p = img.pixels
    fx = ndimage.gaussian_filter(p, sigma, order=(0, 1), mode="nearest")
    fy = ndimage.gaussian_filter(p, sigma, order=(1, 0), mode="nearest")
    fxx = ndimage.gaussian_filter(p, sigma, order=(0, 2), mode="nearest")
    fyy = ndimage.gaussian_filter(p, sigma, order=(2, 0), mode="nearest")
    fxy = ndimage.gaussian_filter(p, sigma, order=(1, 1), mode="nearest")

    h, w = img.shape
    deposits = np.zeros((h, w), dtype=np.float64)
    for ur, uc, dr, dc in _DIRECTIONS:
        d1 = uc * fx + ur * fy
        d2 = uc * uc * fxx + 2.0 * uc * ur * fxy + ur * ur * fyy
        kappa = d2 / np.power(1.0 + d1 * d1, 1.5)
        for rows, cols in _scan_lines(h, w, dr, dc):
            _deposit_runs(kappa[rows, cols], rows, cols, deposits)

    scores = np.zeros((h, w), dtype=np.float64)
    for _, _, dr, dc in _DIRECTIONS:
        fwd = np.maximum(_shift(deposits, -dr, -dc), _shift(deposits, -2 * dr, -2 * dc))
        bwd = np.maximum(_shift(deposits, dr, dc), _shift(deposits, 2 * dr, 2 * dc))
        scores += np.minimum(fwd, bwd)
    return CurvatureScore(scores)


def binarize_scores(score: CurvatureScore, percentile: float = 85.0) -> BinaryMask:
    """Threshold scores at a percentile of the strictly positive values.

    All-zero score maps give an empty mask.  The threshold is inclusive,
    so every pixel at or above the percentile survives.
    """
    if not (0.0 < percentile <= 100.0):
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    positives = score.scores[score.scores > 0.0]
    if positives.size == 0:
        return BinaryMask(np.zeros(score.shape, dtype=np.uint8))
    threshold = float(np.percentile(positives, percentile))
    return BinaryMask((score.scores >= threshold).astype(np.uint8))


@dataclass(frozen=True)
class StructElem:
    """Oriented line structuring element as centered (row, col) offsets."""

    length: int
    angle: float
    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        offs = set(self.offsets)
        if (0, 0) not in offs:
            raise ValueError("structuring element must contain its origin")
        if {(-r, -c) for r, c in offs} != offs:
            raise ValueError("structuring element must be point-symmetric")
        object.__setattr__(self, "offsets", tuple(sorted(offs)))

    def footprint(self) -> tuple[np.ndarray, tuple[int, int]]:
        """Dense boolean footprint and the (row, col) of its origin."""
        rmax = max(abs(r) for r, _ in self.offsets)
        cmax = max(abs(c) for _, c in self.offsets)
        fp = np.zeros((2 * rmax + 1, 2 * cmax + 1), dtype=bool)
        for r, c in self.offsets:
            fp[r + rmax, c + cmax] = True
        return fp, (rmax, cmax)


def line_struct_elem(length: int, angle: float) -> StructElem:
    """Digital line of ``length`` pixels through the origin at ``angle``.

    Steps t = -(length-1)/2 .. (length-1)/2 are rotated by the angle and
    rounded to the grid; duplicates collapse, so very short or steep lines
    may occupy fewer distinct pixels than ``length``.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    steps = np.arange(length, dtype=np.float64) - (length - 1) / 2.0
    rows = np.round(steps * math.sin(angle)).astype(int)
    cols = np.round(steps * math.cos(angle)).astype(int)
    offs = {(int(r), int(c)) for r, c in zip(rows, cols)}
    offs.add((0, 0))
    offs |= {(-r, -c) for r, c in offs}
    return StructElem(length=length, angle=angle, offsets=tuple(sorted(offs)))


def _close_binary(bits: np.ndarray, elem: StructElem) -> np.ndarray:
    """Morphological closing: dilation then erosion with the same element.

    The erosion treats everything outside the frame as set, which keeps
    the pair a true adjunction on the cropped window -- the result is
    extensive (never clears a set bit) and idempotent.
    """
    fp, _ = elem.footprint()
    dilated = ndimage.binary_dilation(bits.astype(bool), structure=fp, border_value=0)
    return ndimage.binary_erosion(dilated, structure=fp, border_value=1).astype(np.uint8)


def close_oriented(
    mask: BinaryMask, field: OrientationField, se_length: int = 5
) -> BinaryMask:
    """Close each block along its ridge direction to bridge small gaps.

    Every block is closed with a line element rotated to the block's
    angle.  The closing runs on a window padded by the element length on
    all sides (clipped at the frame) so bridges can form across block
    seams; only the block interior is written back.  Blocks with zero
    coherence have no meaningful direction and pass through untouched.

    One sweep reads a frozen snapshot (block order is irrelevant), but a
    bridge formed near a seam can enable further bridging in the
    neighbouring block, so the sweep repeats until the mask stops
    changing.  Each sweep only ever adds pixels, so this converges (two
    or three passes in practice) and the whole operation is extensive
    and idempotent like a true closing.
    """
    if se_length < 1:
        raise ValueError(f"element length must be >= 1, got {se_length}")
    h, w = mask.shape
    size = field.block_size
    expect = (math.ceil(h / size), math.ceil(w / size))
    if field.grid_shape != expect:
        raise ValueError(
            f"orientation grid {field.grid_shape} does not cover mask {mask.shape}"
        )
    margin = se_length
    nrows, ncols = field.grid_shape
    src = mask.bits
    while True:
        out = src.copy()
        for bi in range(nrows):
            r0, r1 = bi * size, min((bi + 1) * size, h)
            for bj in range(ncols):
                if field.coherence[bi, bj] <= 0.0:
                    continue
                c0, c1 = bj * size, min((bj + 1) * size, w)
                elem = line_struct_elem(se_length, float(field.angles[bi, bj]))
                rw0, rw1 = max(0, r0 - margin), min(h, r1 + margin)
                cw0, cw1 = max(0, c0 - margin), min(w, c1 + margin)
                closed = _close_binary(src[rw0:rw1, cw0:cw1], elem)
                out[r0:r1, c0:c1] = closed[r0 - rw0 : r1 - rw0, c0 - cw0 : c1 - cw0]
        if np.array_equal(out, src):
            return BinaryMask(out)
        src = out


def remove_small(mask: BinaryMask, min_area: int = 30) -> BinaryMask:
    """Drop 8-connected components smaller than ``min_area`` pixels."""
    if min_area < 0:
        raise ValueError(f"min_area cannot be negative, got {min_area}")
    if min_area <= 1:
        return BinaryMask(mask.bits.copy())
    labels, count = ndimage.label(mask.bits, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return BinaryMask(np.zeros_like(mask.bits))
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    keep = sizes >= min_area
    keep[0] = False
    return BinaryMask(keep[labels].astype(np.uint8))


@dataclass(frozen=True)
class PretreatmentMask:
    """Signed top/bottom field for boundary-guided pretreatment.

    Rows in the top half carry -1, the bottom half +1 (the middle row of
    an odd height joins the bottom).  Built and exposed for callers that
    post-process finger boundaries; the default pipeline does not consume
    it.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.int8)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("pretreatment mask must be a non-empty 2-D grid")
        split = v.shape[0] // 2
        if not (np.all(v[:split] == -1) and np.all(v[split:] == 1)):
            raise ValueError("mask must be -1 on the top half and +1 below")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def build_premask(height: int, width: int) -> PretreatmentMask:
    if height < 1 or width < 1:
        raise ValueError(f"mask size must be >= 1x1, got {height}x{width}")
    values = np.ones((height, width), dtype=np.int8)
    values[: height // 2] = -1
    return PretreatmentMask(values)


@dataclass(frozen=True)
class ExtractionStages:
    """Intermediate products of one extraction run, for inspection."""

    preprocessed: GrayImage
    quantized: QuantizedImage | None
    localization: BinaryMask
    filtered: GrayImage
    scores: CurvatureScore
    pre_closing: BinaryMask
    orientation: OrientationField
    pattern: BinaryMask


def _stage_one(img: GrayImage, cfg: PipelineConfig):
    """Preprocess (optional) and cluster; returns work image, quantized, model."""
    if cfg.preprocess_enabled:
        normalized = normalize_local(
            img, cfg.normalize_window, cfg.normalize_mean, cfg.normalize_var
        )
        denoised = wiener_denoise(normalized, cfg.wiener_window)
        adjusted = adjust_midrange(denoised, cfg.adjust_spec())
        quantized = quantize_levels(adjusted, cfg.adjust_spec())
        work = adjusted
        cluster_input = quantized.image
        k = cfg.k_override if cfg.k_override else quantized.k
    else:
        work = img
        quantized = None
        cluster_input = img
        k = cfg.k_override if cfg.k_override else cfg.adjust_spec().level_count

    if cfg.algo == "optimized":
        model = cluster_optimized(cluster_input, k, max_iter=cfg.max_iter)
    elif cfg.algo == "kmeans":
        model = cluster_kmeans(
            cluster_input, k, seed=cfg.kmeans_seed, max_iter=cfg.max_iter
        )
    elif cfg.algo == "fcm":
        model = cluster_fcm(
            cluster_input,
            k,
            m=cfg.fcm_m,
            eps=cfg.fcm_eps,
            seed=cfg.fcm_seed,
            max_iter=cfg.max_iter,
        )
    elif cfg.algo == "otsu":
        model = threshold_otsu_double(cluster_input)
    else:
        raise ValueError(f"unknown clustering algorithm {cfg.algo!r}")
    return work, quantized, cluster_input, model


def extract_pattern_stages(img: GrayImage, cfg: PipelineConfig | None = None) -> ExtractionStages:
    """Run the full pipeline, keeping every intermediate product."""
    cfg = cfg if cfg is not None else PipelineConfig()
    cfg.validate()
    work, quantized, cluster_input, model = _stage_one(img, cfg)
    region = localize(cluster_input, model)

    kernel = gaussian_kernel(cfg.filter_sigma, cfg.kernel_size)
    filtered = matched_filter(work, kernel)
    raw = max_curvature(filtered, cfg.curvature_sigma)
    gated = CurvatureScore(raw.scores * region.bits)
    pre_closing = binarize_scores(gated, cfg.binarize_percentile)
    orientation = estimate_orientation(filtered, cfg.block_size)
    closed = close_oriented(pre_closing, orientation, cfg.se_length)
    pattern = remove_small(closed, cfg.min_area)
    return ExtractionStages(
        preprocessed=work,
        quantized=quantized,
        localization=region,
        filtered=filtered,
        scores=gated,
        pre_closing=pre_closing,
        orientation=orientation,
        pattern=pattern,
    )


def extract_pattern(img: GrayImage, cfg: PipelineConfig | None = None) -> BinaryMask:
    """Binary vein pattern of one grayscale image under a configuration."""
    return extract_pattern_stages(img, cfg).pattern
