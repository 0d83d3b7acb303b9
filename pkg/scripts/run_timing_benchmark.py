#!/usr/bin/env python3
"""Clustering speed benchmark across image sizes.

Times the four clustering routes (k-means, FCM, Otsu double threshold,
optimized) on seeded phantoms of increasing size, using the shared
benchmark protocol: one discarded warm-up run, then ``--reps`` timed
runs per algorithm with per-rep seeds derived from the master seed.
Each size gets its own timing report (JSON + CSV); the console table
shows mean +/- std in milliseconds.

Typical run:

    python3 scripts/run_timing_benchmark.py --sizes 160x120 320x240 640x480

Point --image at a PGM/PNG file to benchmark a real capture instead of
the phantom sweep.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from veinline.evalkit import PhantomSpec, bench_clustering, gen_phantom, report_to_csv, report_to_json
from veinline.imagecore import load_image


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument(
        "--sizes",
        nargs="+",
        type=parse_size,
        default=[(160, 120), (320, 240), (640, 480)],
        metavar="WxH",
    )
    p.add_argument("--image", type=Path, help="benchmark this image instead of phantoms")
    p.add_argument("--k", type=int, default=5, help="cluster count")
    p.add_argument("--reps", type=int, default=5, help="timed repetitions (>= 3)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", type=Path, default=Path("results/timing"))
    return p.parse_args()


def print_table(report) -> None:
    print(f"\n  {report.image_width}x{report.image_height}, k={report.k}, reps={report.reps}")
    print(f"  {'algorithm':>10}  {'mean (ms)':>10}  {'std (ms)':>9}")
    for entry in report.entries:
        print(f"  {entry.name:>10}  {entry.mean_s * 1e3:10.2f}  {entry.std_s * 1e3:9.2f}")


def main() -> None:
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    if args.image is not None:
        img = load_image(args.image)
        report = bench_clustering(img, args.k, args.reps, args.seed)
        print_table(report)
        stem = args.out / args.image.stem
        report_to_json(report, str(stem) + "_timing.json")
        report_to_csv(report, str(stem) + "_timing.csv")
        print(f"\nreports under {args.out}/")
        return

    for width, height in args.sizes:
        img, _ = gen_phantom(PhantomSpec(seed=args.seed, width=width, height=height))
        report = bench_clustering(img, args.k, args.reps, args.seed)
        print_table(report)
        stem = args.out / f"phantom_{width}x{height}"
        report_to_json(report, str(stem) + "_timing.json")
        report_to_csv(report, str(stem) + "_timing.csv")
    print(f"\nreports under {args.out}/")


if __name__ == "__main__":
    main()
