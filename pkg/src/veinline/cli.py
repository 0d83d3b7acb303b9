"""Command-line front end.

Subcommands mirror the library stages::

    vein preprocess IN OUT     normalize/denoise/adjust one image (or a dir)
    vein cluster IN OUT        stage-one clustering, label map + centers CSV
    vein extract IN OUT        full pipeline to a binary pattern
    vein eval PRED TRUTH OUT   score a pattern against ground truth
    vein bench IN OUT          time the four clustering algorithms
    vein synth OUT             generate a phantom image + truth mask

Settings come from (in increasing precedence) built-in defaults, a
``key = value`` config file (``--config`` or the ``VEIN_CONFIG``
environment variable), and per-key command-line flags (``--block-size 8``).
``preprocess``, ``cluster``, and ``extract`` also accept directories:
every .pgm/.png under IN is processed to the mirrored path under OUT.
Exit status is 0 only if every requested output was written.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path
from typing import get_type_hints

from . import evalkit, extraction
from .clustering import (
    cluster_fcm,
    cluster_kmeans,
    cluster_optimized,
    labels_to_image,
    model_to_csv,
    threshold_otsu_double,
)
from .config import PipelineConfig, parse_config_file
from .gpo import field_to_csv
from .imagecore import (
    GrayImage,
    ImageFormatError,
    load_image,
    load_mask,
    save_image,
    save_mask,
)

_CONFIG_ENV = "VEIN_CONFIG"
_IMAGE_SUFFIXES = (".pgm", ".png")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One optional flag per config field, named with hyphens."""
    parser.add_argument(
        "--config",
        metavar="FILE",
        help=f"key = value settings file (or set ${_CONFIG_ENV})",
    )
    hints = get_type_hints(PipelineConfig)
    for field in dataclasses.fields(PipelineConfig):
        flag = "--" + field.name.replace("_", "-")
        hint = hints[field.name]
        if hint is bool:
            parser.add_argument(
                flag, metavar="BOOL", default=None, help=argparse.SUPPRESS
            )
        else:
            parser.add_argument(flag, default=None, help=argparse.SUPPRESS)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults < config file < explicit flags, then validate."""
    cfg = PipelineConfig()
    path = args.config or os.environ.get(_CONFIG_ENV)
    if path:
        cfg = cfg.with_overrides(parse_config_file(path))
    hints = get_type_hints(PipelineConfig)
    overrides: dict[str, object] = {}
    for field in dataclasses.fields(PipelineConfig):
        raw = getattr(args, field.name, None)
        if raw is None:
            continue
        hint = hints[field.name]
        text = str(raw)
        if hint is bool:
            overrides[field.name] = text.strip().lower() in ("1", "true", "yes", "on")
        elif hint is int:
            overrides[field.name] = int(text)
        elif hint is float:
            overrides[field.name] = float(text)
        elif hint is str:
            overrides[field.name] = text
        else:  # optional int
            overrides[field.name] = None if text.strip().lower() in ("none", "") else int(text)
    cfg = cfg.with_overrides(overrides)
    cfg.validate()
    return cfg


def _iter_jobs(src: str, dst: str, dst_suffix: str) -> list[tuple[Path, Path]]:
    """(input, output) pairs; directories are mirrored recursively."""
    src_path, dst_path = Path(src), Path(dst)
    if src_path.is_dir():
        jobs = []
        for p in sorted(src_path.rglob("*")):
            if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file():
                rel = p.relative_to(src_path)
                jobs.append((p, (dst_path / rel).with_suffix(dst_suffix)))
        if not jobs:
            raise FileNotFoundError(f"no .pgm/.png images under {src}")
        return jobs
    return [(src_path, dst_path)]


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def cmd_preprocess(args: argparse.Namespace) -> int:
    from .preprocess import adjust_midrange, normalize_local, wiener_denoise

    cfg = _build_config(args)
    for src, dst in _iter_jobs(args.input, args.output, ".pgm"):
        img = load_image(str(src))
        normalized = normalize_local(
            img, cfg.normalize_window, cfg.normalize_mean, cfg.normalize_var
        )
        denoised = wiener_denoise(normalized, cfg.wiener_window)
        adjusted = adjust_midrange(denoised, cfg.adjust_spec())
        _ensure_parent(dst)
        save_image(adjusted, str(dst))
        if args.dump_stages:
            from .preprocess import quantize_levels

            stem = dst.with_suffix("")
            save_image(normalized, f"{stem}_normalized.pgm")
            save_image(denoised, f"{stem}_denoised.pgm")
            save_image(adjusted, f"{stem}_adjusted.pgm")
            save_image(quantize_levels(adjusted, cfg.adjust_spec()).image, f"{stem}_quantized.pgm")
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    for src, dst in _iter_jobs(args.input, args.output, ".pgm"):
        img = load_image(str(src))
        k = cfg.k_override if cfg.k_override else cfg.adjust_spec().level_count
        if cfg.algo == "optimized":
            model = cluster_optimized(img, k, max_iter=cfg.max_iter)
        elif cfg.algo == "kmeans":
            model = cluster_kmeans(img, k, seed=cfg.kmeans_seed, max_iter=cfg.max_iter)
        elif cfg.algo == "fcm":
            model = cluster_fcm(
                img, k, m=cfg.fcm_m, eps=cfg.fcm_eps, seed=cfg.fcm_seed,
                max_iter=cfg.max_iter,
            )
        else:
            model = threshold_otsu_double(img)
        _ensure_parent(dst)
        save_image(labels_to_image(model), str(dst))
        model_to_csv(model, str(dst.with_suffix(".csv")))
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    for src, dst in _iter_jobs(args.input, args.output, ".pgm"):
        img = load_image(str(src))
        stages = extraction.extract_pattern_stages(img, cfg)
        _ensure_parent(dst)
        save_mask(stages.pattern, str(dst))
        if args.debug_dumps:
            stem = dst.with_suffix("")
            save_image(stages.filtered, f"{stem}_filtered.pgm")
            peak = stages.scores.scores.max()
            scaled = stages.scores.scores / peak if peak > 0 else stages.scores.scores
            save_image(GrayImage(scaled), f"{stem}_scores.pgm")
            save_mask(stages.pre_closing, f"{stem}_premask.pgm")
            field_to_csv(stages.orientation, f"{stem}_orientation.csv")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    pred = load_mask(args.pred)
    truth = load_mask(args.truth)
    report = evalkit.metrics(evalkit.confusion(pred, truth))
    stem = Path(args.output)
    _ensure_parent(stem)
    if args.quality:
        # re-read both paths as grayscale and score fidelity of pred vs truth
        quality = evalkit.quality_report(load_image(args.truth), load_image(args.pred))
        evalkit.report_to_json(quality, f"{stem}_quality.json")
        evalkit.report_to_csv(quality, f"{stem}_quality.csv")
    evalkit.report_to_json(report, f"{stem}.json")
    evalkit.report_to_csv(report, f"{stem}.csv")
    print(
        f"accuracy={report.accuracy:.5f} precision={report.precision:.5f} "
        f"recall={report.recall:.5f} f1={report.f1:.5f}"
    )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    img = load_image(args.input)
    report = evalkit.bench_clustering(
        img, cfg.bench_k, cfg.bench_reps, master_seed=cfg.bench_seed
    )
    stem = Path(args.output)
    _ensure_parent(stem)
    evalkit.report_to_json(report, f"{stem}.json")
    evalkit.report_to_csv(report, f"{stem}.csv")
    for entry in report.entries:
        print(f"{entry.name:>10}: {entry.mean_s:.6f} s  (std {entry.std_s:.6f})")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = evalkit.PhantomSpec(
        seed=args.seed,
        width=args.width,
        height=args.height,
        vein_count=args.vein_count,
        vein_width_range=(args.vein_width_min, args.vein_width_max),
        background_level=args.background,
        vein_depth=args.depth,
        blur_sigma=args.blur_sigma,
        noise_sigma=args.noise_sigma,
    )
    img, truth = evalkit.gen_phantom(spec)
    stem = Path(args.output)
    _ensure_parent(stem)
    save_image(img, f"{stem}.pgm")
    save_mask(truth, f"{stem}_truth.pgm")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vein", description="finger-vein pattern extraction toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize, denoise, and adjust images")
    p.add_argument("input", help="input image or directory")
    p.add_argument("output", help="output image or directory")
    p.add_argument("--dump-stages", action="store_true", help="write every stage")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("cluster", help="stage-one clustering to a label map")
    p.add_argument("input", help="input image or directory")
    p.add_argument("output", help="label image or directory (.csv written beside)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("extract", help="extract the binary vein pattern")
    p.add_argument("input", help="input image or directory")
    p.add_argument("output", help="pattern image or directory")
    p.add_argument(
        "--debug-dumps",
        action="store_true",
        help="also write filtered/scores/pre-closing images and orientation CSV",
    )
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score a pattern against ground truth")
    p.add_argument("pred", help="predicted mask image")
    p.add_argument("truth", help="ground-truth mask image")
    p.add_argument("output", help="report stem (writes .json and .csv)")
    p.add_argument(
        "--quality",
        action="store_true",
        help="also score grayscale fidelity (MSE/PSNR/SNR) of pred vs truth",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time the clustering algorithms on one image")
    p.add_argument("input", help="input image")
    p.add_argument("output", help="report stem (writes .json and .csv)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic vein phantom")
    p.add_argument("output", help="output stem (writes .pgm and _truth.pgm)")
    d = evalkit.PhantomSpec()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--width", type=int, default=d.width)
    p.add_argument("--height", type=int, default=d.height)
    p.add_argument("--vein-count", type=int, default=d.vein_count)
    p.add_argument("--vein-width-min", type=float, default=d.vein_width_range[0])
    p.add_argument("--vein-width-max", type=float, default=d.vein_width_range[1])
    p.add_argument("--background", type=float, default=d.background_level)
    p.add_argument("--depth", type=float, default=d.vein_depth)
    p.add_argument("--blur-sigma", type=float, default=d.blur_sigma)
    p.add_argument("--noise-sigma", type=float, default=d.noise_sigma)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, ImageFormatError) as exc:
        print(f"vein: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
