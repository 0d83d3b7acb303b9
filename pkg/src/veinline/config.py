"""Pipeline configuration: one dataclass, a flat-file parser, overrides.

Config files are plain ``key = value`` lines (``#`` comments, blank lines
ignored); keys match the :class:`PipelineConfig` field names.  Values are
coerced by the field's type; booleans accept true/false/1/0/yes/no, and
``k_override`` additionally accepts ``none``.  Precedence is handled by
the callers: explicit flags > config file > defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import get_type_hints

from .preprocess import AdjustSpec

__all__ = ["PipelineConfig", "parse_config_file"]

_ALGOS = ("optimized", "kmeans", "fcm", "otsu")


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the extraction pipeline, with working defaults.

    Defaults match the recommended operating point: 5 quantization levels
    over the [0.2, 0.6] mid-range, 16-pixel analysis blocks, and the
    deterministic clusterer for localization.
    """

    # preprocessing
    preprocess_enabled: bool = True
    normalize_window: int = 15
    normalize_mean: float = 0.5
    normalize_var: float = 0.02
    wiener_window: int = 3
    adjust_low_in: float = 0.30
    adjust_high_in: float = 0.70
    adjust_low_out: float = 0.2
    adjust_high_out: float = 0.6
    quantize_step: float = 0.1

    # stage one: localization clustering
    algo: str = "optimized"
    k_override: int | None = None
    max_iter: int = 100
    kmeans_seed: int = 0
    fcm_m: float = 2.0
    fcm_eps: float = 1e-4
    fcm_seed: int = 0

    # stage two: line extraction
    filter_sigma: float = 1.0
    kernel_size: int = 0  # 0 = derive from filter_sigma
    curvature_sigma: float = 1.0
    binarize_percentile: float = 3.0
    block_size: int = 16
    freq_window: int = 32
    se_length: int = 9
    min_area: int = 30

    # benchmark defaults
    bench_k: int = 5
    bench_reps: int = 5
    bench_seed: int = 0

    def adjust_spec(self) -> AdjustSpec:
        return AdjustSpec(
            l_in=self.adjust_low_in,
            h_in=self.adjust_high_in,
            l_out=self.adjust_low_out,
            h_out=self.adjust_high_out,
            step=self.quantize_step,
        )

    def validate(self) -> None:
        """Raise ValueError naming the offending key on any bad setting."""

        def _odd_window(key: str, value: int, minimum: int = 3) -> None:
            if value < minimum or value % 2 == 0:
                raise ValueError(
                    f"{key} must be an odd integer >= {minimum}, got {value}"
                )

        _odd_window("normalize_window", self.normalize_window)
        _odd_window("wiener_window", self.wiener_window)
        if self.normalize_mean < 0.0 or self.normalize_mean > 1.0:
            raise ValueError(f"normalize_mean must be in [0, 1], got {self.normalize_mean}")
        if self.normalize_var <= 0.0:
            raise ValueError(f"normalize_var must be positive, got {self.normalize_var}")
        try:
            self.adjust_spec()
        except ValueError as exc:
            raise ValueError(f"adjust/quantize settings invalid: {exc}") from exc
        if self.algo not in _ALGOS:
            raise ValueError(f"algo must be one of {_ALGOS}, got {self.algo!r}")
        if self.k_override is not None and self.k_override < 1:
            raise ValueError(f"k_override must be >= 1 or none, got {self.k_override}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.fcm_m <= 1.0:
            raise ValueError(f"fcm_m must be > 1, got {self.fcm_m}")
        if self.fcm_eps <= 0.0:
            raise ValueError(f"fcm_eps must be positive, got {self.fcm_eps}")
        if self.filter_sigma <= 0.0:
            raise ValueError(f"filter_sigma must be positive, got {self.filter_sigma}")
        if self.kernel_size != 0 and (self.kernel_size < 1 or self.kernel_size % 2 == 0):
            raise ValueError(
                f"kernel_size must be 0 (auto) or odd >= 1, got {self.kernel_size}"
            )
        if self.curvature_sigma <= 0.0:
            raise ValueError(
                f"curvature_sigma must be positive, got {self.curvature_sigma}"
            )
        if not (0.0 < self.binarize_percentile <= 100.0):
            raise ValueError(
                f"binarize_percentile must be in (0, 100], got {self.binarize_percentile}"
            )
        if self.block_size < 4:
            raise ValueError(f"block_size must be >= 4, got {self.block_size}")
        if self.freq_window < 2 * self.block_size:
            raise ValueError(
                f"freq_window must be >= 2*block_size, got {self.freq_window}"
            )
        if self.se_length < 1:
            raise ValueError(f"se_length must be >= 1, got {self.se_length}")
        if self.min_area < 0:
            raise ValueError(f"min_area cannot be negative, got {self.min_area}")
        if self.bench_k < 1:
            raise ValueError(f"bench_k must be >= 1, got {self.bench_k}")
        if self.bench_reps < 3:
            raise ValueError(f"bench_reps must be >= 3, got {self.bench_reps}")

    def with_overrides(self, overrides: dict[str, object]) -> "PipelineConfig":
        """New config with the given fields replaced (and re-validated keys)."""
        known = {f.name for f in dataclasses.fields(self)}
        for key in overrides:
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
        return dataclasses.replace(self, **overrides)


def _coerce(key: str, text: str, target_type) -> object:
    text = text.strip()
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: cannot parse {text!r} as a boolean")
    if target_type is int:
        try:
            return int(text)
        except ValueError as exc:
            raise ValueError(f"{key}: cannot parse {text!r} as an integer") from exc
    if target_type is float:
        try:
            return float(text)
        except ValueError as exc:
            raise ValueError(f"{key}: cannot parse {text!r} as a number") from exc
    if target_type is str:
        return text
    # the only non-scalar field type: optional int
    if text.lower() in ("none", ""):
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise ValueError(f"{key}: cannot parse {text!r} as an integer or none") from exc


def parse_config_file(path: str) -> dict[str, object]:
    """Read ``key = value`` lines into a typed override dict."""
    hints = get_type_hints(PipelineConfig)
    overrides: dict[str, object] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in hints:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            target = hints[key]
            if target in (bool, int, float, str):
                overrides[key] = _coerce(key, value, target)
            else:
                overrides[key] = _coerce(key, value, None)
    return overrides
