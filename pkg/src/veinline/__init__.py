"""veinline: finger-vein pattern extraction from grayscale images.

Two-stage pipeline: deterministic intensity clustering localizes the vein
region, then orientation/frequency-aware curvature scoring extracts the
binary vein lines.  Baseline clusterers (k-means, fuzzy c-means, double
Otsu) and an evaluation toolkit are included for comparison studies.
"""

from .clustering import (
    ClusterInit,
    ClusterModel,
    cluster_fcm,
    cluster_kmeans,
    cluster_optimized,
    deterministic_init,
    localize,
    threshold_otsu_double,
)
from .config import PipelineConfig
from .evalkit import (
    ConfusionCounts,
    MetricReport,
    PhantomSpec,
    QualityReport,
    TimingReport,
    bench_clustering,
    confusion,
    gen_grating,
    gen_phantom,
    metrics,
    mse,
    psnr,
    quality_report,
    snr,
)
from .extraction import (
    CurvatureScore,
    Kernel,
    binarize_scores,
    close_oriented,
    extract_pattern,
    extract_pattern_stages,
    gaussian_kernel,
    matched_filter,
    max_curvature,
    remove_small,
)
from .gpo import (
    FrequencyMap,
    GradientPair,
    OrientationField,
    estimate_frequency,
    estimate_orientation,
    sobel_gradients,
)
from .imagecore import (
    BinaryMask,
    CorruptImageError,
    GrayImage,
    ImageFormatError,
    UnsupportedImageFormat,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .preprocess import (
    AdjustSpec,
    QuantizedImage,
    adjust_midrange,
    normalize_local,
    quantize_levels,
    wiener_denoise,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustSpec",
    "BinaryMask",
    "ClusterInit",
    "ClusterModel",
    "ConfusionCounts",
    "CorruptImageError",
    "CurvatureScore",
    "FrequencyMap",
    "GradientPair",
    "GrayImage",
    "ImageFormatError",
    "Kernel",
    "MetricReport",
    "OrientationField",
    "PhantomSpec",
    "PipelineConfig",
    "QualityReport",
    "QuantizedImage",
    "TimingReport",
    "UnsupportedImageFormat",
    "adjust_midrange",
    "bench_clustering",
    "binarize_scores",
    "close_oriented",
    "cluster_fcm",
    "cluster_kmeans",
    "cluster_optimized",
    "confusion",
    "deterministic_init",
    "estimate_frequency",
    "estimate_orientation",
    "extract_pattern",
    "extract_pattern_stages",
    "gaussian_kernel",
    "gen_grating",
    "gen_phantom",
    "load_image",
    "load_mask",
    "localize",
    "matched_filter",
    "max_curvature",
    "metrics",
    "mse",
    "normalize_local",
    "psnr",
    "quality_report",
    "quantize_levels",
    "remove_small",
    "save_image",
    "save_mask",
    "snr",
    "sobel_gradients",
    "threshold_otsu_double",
    "wiener_denoise",
]
