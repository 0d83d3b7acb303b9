"""Intensity clustering for vein-region localization.

Four ways of splitting a grayscale image into ``k`` intensity groups live
here: a deterministic quantization-aware scheme, plain k-means, fuzzy
c-means, and a double-threshold histogram split.  All of them hand back the
same :class:`ClusterModel` so the rest of the pipeline (and the benchmark
harness) can treat them interchangeably.

Conventions shared by every algorithm:

* labels are 1-based, ``1..k``;
* each pixel's label points at a nearest center, with exact ties going to
  the lowest cluster index;
* ``elapsed`` is wall-clock seconds for the core fitting loop.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .imagecore import BinaryMask, GrayImage, quantize_u8

__all__ = [
    "ClusterInit",
    "ClusterModel",
    "deterministic_init",
    "cluster_optimized",
    "cluster_kmeans",
    "cluster_fcm",
    "threshold_otsu_double",
    "localize",
    "labels_to_image",
    "model_to_csv",
]

_DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class ClusterInit:
    """Deterministic starting state for the quantization-aware clusterer.

    ``i_range`` is the observed (min, max) intensity span, ``step_size`` the
    span divided by the cluster count, and ``initial_centers`` the midpoints
    of the ``k`` equal sub-intervals.
    """

    k: int
    i_range: tuple[float, float]
    step_size: float
    initial_centers: np.ndarray

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"cluster count must be >= 1, got {self.k}")
        lo, hi = self.i_range
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ValueError(f"invalid intensity range {self.i_range!r}")
        centers = np.asarray(self.initial_centers, dtype=np.float64)
        if centers.shape != (self.k,):
            raise ValueError("initial_centers must have one entry per cluster")
        centers.setflags(write=False)
        object.__setattr__(self, "initial_centers", centers)


@dataclass(frozen=True)
class ClusterModel:
    """Result of fitting an intensity clustering to one image.

    ``centers`` holds one intensity per cluster, ``labels`` the 1-based
    assignment grid, and ``populations`` the pixel count per cluster.
    """

    k: int
    centers: np.ndarray
    labels: np.ndarray
    iterations: int
    converged: bool
    elapsed: float
    populations: np.ndarray

    def __post_init__(self) -> None:
        centers = np.asarray(self.centers, dtype=np.float64)
        labels = np.asarray(self.labels)
        pops = np.asarray(self.populations, dtype=np.int64)
        if self.k < 1:
            raise ValueError(f"cluster count must be >= 1, got {self.k}")
        if centers.shape != (self.k,):
            raise ValueError("centers must have one entry per cluster")
        if not np.all(np.isfinite(centers)):
            raise ValueError("cluster centers must be finite")
        if np.any(centers < 0.0) or np.any(centers > 1.0):
            raise ValueError("cluster centers must lie in [0, 1]")
        if labels.ndim != 2:
            raise ValueError("labels must be a 2-D grid")
        if not np.issubdtype(labels.dtype, np.integer):
            labels = labels.astype(np.int32)
        if labels.size and (labels.min() < 1 or labels.max() > self.k):
            raise ValueError("labels must lie in 1..k")
        if pops.shape != (self.k,):
            raise ValueError("populations must have one entry per cluster")
        if int(pops.sum()) != labels.size:
            raise ValueError("populations must sum to the pixel count")
        if self.iterations < 0:
            raise ValueError("iteration count cannot be negative")
        if self.elapsed < 0.0:
            raise ValueError("elapsed time cannot be negative")
        for name, arr in (("centers", centers), ("labels", labels), ("populations", pops)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def _populations(labels: np.ndarray, k: int) -> np.ndarray:
    return np.bincount(labels.ravel() - 1, minlength=k).astype(np.int64)


def _assign_sorted(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center assignment for an ascending center array.

    With sorted centers the nearest-neighbour regions are intervals, so a
    pixel's cluster index is simply how many of the k-1 midpoints between
    consecutive centers lie strictly below it.  A value sitting exactly on
    a midpoint counts no further, landing in the lower cluster -- the
    lowest-index tie rule.  Returns 0-based indices.

    Counting via broadcast comparisons beats a binary search for the small
    k used here; both compute #{cuts < value}, so they agree bit for bit.
    """
    if centers.size == 1:
        return np.zeros(values.shape, dtype=np.int32)
    cuts = (centers[:-1] + centers[1:]) / 2.0
    if cuts.size <= 8:
        idx = (values > cuts[0]).astype(np.int32)
        for cut in cuts[1:]:
            idx += values > cut
        return idx
    return np.searchsorted(cuts, values, side="left").astype(np.int32)


def _assign_general(values: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center assignment for arbitrary center order (0-based).

    Builds the full |value - center| matrix; ``argmin`` keeps the first of
    several equal minima, which is the lowest-index tie rule.
    """
    dist = np.abs(values[:, None] - centers[None, :])
    return np.argmin(dist, axis=1).astype(np.int32)


def _update_centers(
    values: np.ndarray, idx: np.ndarray, centers: np.ndarray, k: int
) -> np.ndarray:
    """Means per cluster; clusters with no members keep their old center."""
    counts = np.bincount(idx, minlength=k)
    sums = np.bincount(idx, weights=values, minlength=k)
    out = centers.copy()
    filled = counts > 0
    out[filled] = sums[filled] / counts[filled]
    return out


def deterministic_init(img: GrayImage, k: int) -> ClusterInit:
    """Midpoint seeding over the observed intensity range.

    The range ``[min, max]`` is cut into ``k`` equal steps and each cluster
    starts at its step's midpoint: ``min + span * (i - 0.5) / k`` for
    ``i = 1..k``.  No randomness is involved, so identical inputs always
    produce identical starting centers.
    """
    if k < 1:
        raise ValueError(f"cluster count must be >= 1, got {k}")
    values = img.pixels
    lo = float(values.min())
    hi = float(values.max())
    span = hi - lo
    steps = np.arange(1, k + 1, dtype=np.float64)
    centers = lo + span * (steps - 0.5) / k
    return ClusterInit(k=k, i_range=(lo, hi), step_size=span / k, initial_centers=centers)


def cluster_optimized(
    img: GrayImage, k: int, max_iter: int = _DEFAULT_MAX_ITER
) -> ClusterModel:
    """Deterministic 1-D clustering seeded from the intensity range.

    Runs Lloyd iterations from :func:`deterministic_init` until an
    assignment pass changes no labels (or ``max_iter`` is hit).  Centers
    stay sorted throughout -- a cluster's members always lie left of the
    next cluster's members -- which lets assignment use a binary search
    against k-1 midpoints instead of a full distance matrix.  Intended for
    quantized images where ``k`` equals the number of intensity levels, but
    correct for any grayscale input.
    """
    if k < 1:
        raise ValueError(f"cluster count must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    init = deterministic_init(img, k)
    values = img.pixels.ravel()

    start = time.perf_counter()
    centers = init.initial_centers.copy()
    idx = _assign_sorted(values, centers)
    iterations = 0
    converged = False
    while iterations < max_iter:
        centers = _update_centers(values, idx, centers, k)
        new_idx = _assign_sorted(values, centers)
        iterations += 1
        if np.array_equal(new_idx, idx):
            converged = True
            break
        # labels always track the latest centers, converged or not
        idx = new_idx
    elapsed = time.perf_counter() - start

    labels = (idx + 1).reshape(img.shape)
    return ClusterModel(
        k=k,
        centers=centers,
        labels=labels,
        iterations=iterations,
        converged=converged,
        elapsed=elapsed,
        populations=_populations(labels, k),
    )


def _seed_centers(values: np.ndarray, k: int, seed: int) -> np.ndarray:
    distinct = np.unique(values)
    if distinct.size < k:
        raise ValueError(
            f"need at least {k} distinct intensities to seed {k} clusters, "
            f"got {distinct.size}"
        )
    rng = np.random.default_rng(seed)
    return rng.choice(distinct, size=k, replace=False).astype(np.float64)


def cluster_kmeans(
    img: GrayImage,
    k: int,
    seed: int = 0,
    max_iter: int = _DEFAULT_MAX_ITER,
) -> ClusterModel:
    """Textbook k-means on intensities with seeded random initialization.

    Initial centers are drawn without replacement from the distinct pixel
    values (so no two clusters start on top of each other); assignment uses
    the full pixel-by-center distance matrix.  Converges when a pass
    changes no labels.
    """
    if k < 1:
        raise ValueError(f"cluster count must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    values = img.pixels.ravel()
    centers = _seed_centers(values, k, seed)

    start = time.perf_counter()
    idx = _assign_general(values, centers)
    iterations = 0
    converged = False
    while iterations < max_iter:
        centers = _update_centers(values, idx, centers, k)
        new_idx = _assign_general(values, centers)
        iterations += 1
        if np.array_equal(new_idx, idx):
            converged = True
            break
        idx = new_idx
    elapsed = time.perf_counter() - start

    labels = (idx + 1).reshape(img.shape)
    return ClusterModel(
        k=k,
        centers=centers,
        labels=labels,
        iterations=iterations,
        converged=converged,
        elapsed=elapsed,
        populations=_populations(labels, k),
    )


def _fcm_memberships(values: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    """Fuzzy membership matrix (n x k) for exponent ``m``.

    Standard inverse-distance form u_ij = d_ij^(-2/(m-1)) normalized per
    pixel.  Pixels sitting exactly on a center (or close enough that the
    power overflows) get a hard membership on the first such center.
    """
    dist = np.abs(values[:, None] - centers[None, :])
    with np.errstate(divide="ignore", over="ignore"):
        weights = np.where(dist > 0.0, dist, 1.0) ** (-2.0 / (m - 1.0))
    weights = np.where(dist > 0.0, weights, np.inf)
    u = np.empty_like(weights)
    hard = ~np.isfinite(weights).all(axis=1)
    soft = ~hard
    u[soft] = weights[soft] / weights[soft].sum(axis=1, keepdims=True)
    if hard.any():
        u[hard] = 0.0
        first = np.argmax(~np.isfinite(weights[hard]), axis=1)
        u[np.nonzero(hard)[0], first] = 1.0
    return u


def cluster_fcm(
    img: GrayImage,
    k: int,
    m: float = 2.0,
    eps: float = 1e-4,
    seed: int = 0,
    max_iter: int = _DEFAULT_MAX_ITER,
) -> ClusterModel:
    """Fuzzy c-means on intensities, defuzzified to hard labels at the end.

    Alternates membership and center updates until the largest center
    movement drops below ``eps``.  The returned labels are the argmax of
    the memberships recomputed against the final centers, which for the
    standard weights coincides with nearest-center assignment.
    """
    if k < 1:
        raise ValueError(f"cluster count must be >= 1, got {k}")
    if m <= 1.0:
        raise ValueError(f"fuzzifier must be > 1, got {m}")
    if eps <= 0.0:
        raise ValueError(f"tolerance must be positive, got {eps}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    values = img.pixels.ravel()
    centers = _seed_centers(values, k, seed)

    start = time.perf_counter()
    iterations = 0
    converged = False
    while iterations < max_iter:
        u = _fcm_memberships(values, centers, m)
        um = u**m
        mass = um.sum(axis=0)
        weighted = (um * values[:, None]).sum(axis=0)
        new_centers = centers.copy()
        filled = mass > 0.0
        new_centers[filled] = weighted[filled] / mass[filled]
        shift = float(np.max(np.abs(new_centers - centers)))
        centers = new_centers
        iterations += 1
        if shift < eps:
            converged = True
            break
    # Defuzzify against the centers we actually return.
    u = _fcm_memberships(values, centers, m)
    idx = np.argmax(u, axis=1).astype(np.int32)
    elapsed = time.perf_counter() - start

    labels = (idx + 1).reshape(img.shape)
    return ClusterModel(
        k=k,
        centers=centers,
        labels=labels,
        iterations=iterations,
        converged=converged,
        elapsed=elapsed,
        populations=_populations(labels, k),
    )


def threshold_otsu_double(img: GrayImage) -> ClusterModel:
    """Three-way split by an exhaustive double-threshold variance search.

    The image is binned onto the 8-bit grid (same rounding as the PGM
    writer), then every threshold pair ``0 <= t1 < t2 <= 255`` is scored by
    between-class variance of the three classes ``[0..t1]``, ``(t1..t2]``,
    ``(t2..255]``; empty classes contribute nothing.  The first maximal
    pair in (t1, t2) lexicographic order wins.  Class centers are the mean
    intensity of their members; an empty class borrows the center of its
    nearest lower non-empty neighbour (nearest upper for the lowest class)
    so the model always carries k=3 finite centers.
    """
    bins = quantize_u8(img.pixels)
    hist = np.bincount(bins.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise ValueError(
            "degenerate histogram: need at least two distinct 8-bit levels"
        )

    start = time.perf_counter()
    levels = np.arange(256, dtype=np.float64) / 255.0
    w = np.cumsum(hist)
    s = np.cumsum(hist * levels)
    total = w[-1]
    total_sum = s[-1]

    # Class masses and intensity sums for every (t1, t2) pair at once.
    w1 = w[:, None]
    s1 = s[:, None]
    n_a = np.broadcast_to(w1, (256, 256))
    n_b = w[None, :] - w1
    n_c = total - w[None, :]
    s_a = np.broadcast_to(s1, (256, 256))
    s_b = s[None, :] - s1
    s_c = total_sum - s[None, :]

    def _term(mass: np.ndarray, total_i: np.ndarray) -> np.ndarray:
        out = np.zeros_like(mass)
        np.divide(total_i * total_i, mass, out=out, where=mass > 0)
        return out

    # between-class variance * N, up to the constant N*mu^2
    score = _term(n_a, s_a) + _term(n_b, s_b) + _term(n_c, s_c)
    score[np.tril_indices(256)] = -np.inf  # require t1 < t2
    flat_best = int(np.argmax(score))  # first max in row-major = lexicographic
    t1, t2 = divmod(flat_best, 256)

    idx = ((bins > t1).astype(np.int32) + (bins > t2).astype(np.int32)).ravel()
    counts = np.bincount(idx, minlength=3).astype(np.float64)
    sums = np.bincount(idx, weights=levels[bins.ravel()], minlength=3)
    centers = np.zeros(3, dtype=np.float64)
    filled = counts > 0
    centers[filled] = sums[filled] / counts[filled]
    fill_order = np.nonzero(filled)[0]
    for c in range(3):
        if not filled[c]:
            lower = fill_order[fill_order < c]
            donor = int(lower[-1]) if lower.size else int(fill_order[0])
            centers[c] = centers[donor]
    elapsed = time.perf_counter() - start

    labels = (idx + 1).reshape(img.shape)
    return ClusterModel(
        k=3,
        centers=centers,
        labels=labels,
        iterations=1,
        converged=True,
        elapsed=elapsed,
        populations=_populations(labels, 3),
    )


def localize(img: GrayImage, model: ClusterModel) -> BinaryMask:
    """Mark every pixel whose cluster center is the darkest center.

    Veins image darker than surrounding tissue, so the cluster(s) whose
    center equals the minimum center delimit the candidate vein region.
    With k=1 (or an all-equal center vector) the whole frame is selected.
    """
    if model.shape != img.shape:
        raise ValueError(
            f"label grid {model.shape} does not match image {img.shape}"
        )
    darkest = model.centers.min()
    bits = (model.centers[model.labels - 1] == darkest).astype(np.uint8)
    return BinaryMask(bits)


def labels_to_image(model: ClusterModel) -> GrayImage:
    """Render labels as evenly spaced gray levels for visual inspection."""
    if model.k == 1:
        shade = np.zeros(model.shape, dtype=np.float64)
    else:
        shade = (model.labels - 1) / (model.k - 1)
    return GrayImage(shade)


def model_to_csv(model: ClusterModel, path: str) -> None:
    """Write one row per cluster: index, center, population."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "center", "population"])
        for i in range(model.k):
            writer.writerow(
                [i + 1, repr(float(model.centers[i])), int(model.populations[i])]
            )
