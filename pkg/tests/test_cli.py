"""End-to-end CLI coverage: every subcommand through main(argv)."""

import json

import numpy as np
import pytest

from veinline.cli import main
from veinline.evalkit import PhantomSpec, gen_phantom
from veinline.imagecore import load_image, load_mask, save_image


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("VEIN_CONFIG", raising=False)


def phantom_pgm(tmp_path, name="in.pgm", seed=0, width=64, height=48, **kw):
    img, truth = gen_phantom(PhantomSpec(seed=seed, width=width, height=height, **kw))
    path = tmp_path / name
    save_image(img, str(path))
    return path, truth


# --------------------------------------------------------------------------
# preprocess
# --------------------------------------------------------------------------


def test_preprocess_valid_image_exit_zero(tmp_path):
    src, _ = phantom_pgm(tmp_path)
    out = tmp_path / "out.pgm"
    assert main(["preprocess", str(src), str(out)]) == 0
    assert out.exists()
    assert load_image(str(out)).shape == (48, 64)


def test_preprocess_missing_input_exit_one(tmp_path, capsys):
    out = tmp_path / "out.pgm"
    assert main(["preprocess", str(tmp_path / "nope.pgm"), str(out)]) == 1
    assert not out.exists()
    assert "vein: error" in capsys.readouterr().err


def test_preprocess_dump_stages_writes_four_files(tmp_path):
    src, _ = phantom_pgm(tmp_path)
    outdir = tmp_path / "staged"
    out = outdir / "out.pgm"
    assert main(["preprocess", str(src), str(out), "--dump-stages"]) == 0
    stages = sorted(p.name for p in outdir.iterdir() if p.name != "out.pgm")
    assert stages == [
        "out_adjusted.pgm",
        "out_denoised.pgm",
        "out_normalized.pgm",
        "out_quantized.pgm",
    ]


def test_preprocess_directory_mirrors_tree(tmp_path):
    src_dir = tmp_path / "in"
    (src_dir / "sub").mkdir(parents=True)
    phantom_pgm(src_dir, "a.pgm", seed=1, width=32, height=32)
    phantom_pgm(src_dir / "sub", "b.pgm", seed=2, width=32, height=32)
    out_dir = tmp_path / "out"
    assert main(["preprocess", str(src_dir), str(out_dir)]) == 0
    assert (out_dir / "a.pgm").exists()
    assert (out_dir / "sub" / "b.pgm").exists()


def test_preprocess_empty_directory_exit_one(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["preprocess", str(tmp_path / "empty"), str(tmp_path / "o")]) == 1


# --------------------------------------------------------------------------
# cluster
# --------------------------------------------------------------------------


def test_cluster_writes_label_image_and_csv(tmp_path):
    src, _ = phantom_pgm(tmp_path)
    out = tmp_path / "labels.pgm"
    assert main(["cluster", str(src), str(out)]) == 0
    assert out.exists()
    csv_path = tmp_path / "labels.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "cluster,center,population"
    assert len(lines) == 1 + 5  # default k from the 5-level quantizer


def test_cluster_k_override_flag_beats_config_file(tmp_path):
    src, _ = phantom_pgm(tmp_path, width=32, height=32)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("k_override = 2\n")
    out = tmp_path / "labels.pgm"
    assert (
        main(
            [
                "cluster",
                str(src),
                str(out),
                "--config",
                str(cfg),
                "--k-override",
                "3",
            ]
        )
        == 0
    )
    lines = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 3


def test_cluster_env_var_config_applies(tmp_path, monkeypatch):
    src, _ = phantom_pgm(tmp_path, width=32, height=32)
    cfg = tmp_path / "env.cfg"
    cfg.write_text("k_override = 2\n")
    monkeypatch.setenv("VEIN_CONFIG", str(cfg))
    out = tmp_path / "labels.pgm"
    assert main(["cluster", str(src), str(out)]) == 0
    lines = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2


def test_cluster_algo_choice_rejected(tmp_path, capsys):
    src, _ = phantom_pgm(tmp_path, width=32, height=32)
    out = tmp_path / "labels.pgm"
    assert main(["cluster", str(src), str(out), "--algo", "voronoi"]) == 1
    assert "algo" in capsys.readouterr().err


# --------------------------------------------------------------------------
# extract
# --------------------------------------------------------------------------


def test_extract_phantom_mask_bytes_binary(tmp_path):
    src, _ = phantom_pgm(tmp_path, width=96, height=80)
    out = tmp_path / "pattern.pgm"
    assert main(["extract", str(src), str(out)]) == 0
    values = np.unique(load_image(str(out)).pixels)
    assert set(values.tolist()) <= {0.0, 1.0}


@pytest.mark.parametrize("algo", ["optimized", "kmeans", "fcm", "otsu"])
def test_extract_algo_selector(tmp_path, algo):
    src, _ = phantom_pgm(tmp_path, width=96, height=80)
    out = tmp_path / f"{algo}.pgm"
    assert main(["extract", str(src), str(out), "--algo", algo]) == 0
    assert out.exists()


def test_extract_rerun_byte_identical(tmp_path):
    src, _ = phantom_pgm(tmp_path, width=96, height=80)
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    assert main(["extract", str(src), str(a)]) == 0
    assert main(["extract", str(src), str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_extract_debug_dumps(tmp_path):
    src, _ = phantom_pgm(tmp_path, width=96, height=80)
    outdir = tmp_path / "dbg"
    out = outdir / "pattern.pgm"
    assert main(["extract", str(src), str(out), "--debug-dumps"]) == 0
    for suffix in ("_filtered.pgm", "_scores.pgm", "_premask.pgm", "_orientation.csv"):
        assert (outdir / f"pattern{suffix}").exists()


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------


def test_eval_identical_masks_perfect_f1(tmp_path, capsys):
    stem = tmp_path / "ph"
    assert main(["synth", str(stem), "--width", "64", "--height", "48"]) == 0
    truth = f"{stem}_truth.pgm"
    out = tmp_path / "report"
    assert main(["eval", truth, truth, str(out)]) == 0
    assert "f1=1.00000" in capsys.readouterr().out
    got = json.loads((tmp_path / "report.json").read_text())
    assert got["f1"] == 1.0
    assert got["recall"] == 1.0


def test_eval_mismatched_sizes_no_output(tmp_path):
    a_stem = tmp_path / "a"
    b_stem = tmp_path / "b"
    assert main(["synth", str(a_stem), "--width", "64", "--height", "48"]) == 0
    assert main(["synth", str(b_stem), "--width", "32", "--height", "32"]) == 0
    out = tmp_path / "report"
    code = main(["eval", f"{a_stem}_truth.pgm", f"{b_stem}_truth.pgm", str(out)])
    assert code == 1
    assert not (tmp_path / "report.json").exists()
    assert not (tmp_path / "report.csv").exists()


def test_eval_json_and_csv_agree(tmp_path):
    stem = tmp_path / "ph"
    assert main(["synth", str(stem), "--width", "64", "--height", "48"]) == 0
    pred = f"{stem}_truth.pgm"
    out = tmp_path / "report"
    assert main(["eval", pred, pred, str(out)]) == 0
    as_json = json.loads((tmp_path / "report.json").read_text())
    header, row = (tmp_path / "report.csv").read_text().strip().splitlines()[:2]
    as_csv = dict(zip(header.split(","), row.split(",")))
    for key in ("accuracy", "precision", "recall", "f1"):
        assert float(as_csv[key]) == as_json[key]


def test_eval_quality_mode_writes_fidelity_report(tmp_path):
    src, _ = phantom_pgm(tmp_path)
    out = tmp_path / "report"
    assert main(["eval", str(src), str(src), str(out), "--quality"]) == 0
    got = json.loads((tmp_path / "report_quality.json").read_text())
    assert got["mse"] == 0.0
    assert got["psnr_db"] == "inf"
    assert (tmp_path / "report_quality.csv").exists()


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------


def test_bench_four_rows_and_reproducible_digests(tmp_path, capsys):
    src, _ = phantom_pgm(tmp_path, width=48, height=32)
    flags = ["--bench-reps", "3", "--bench-k", "3"]
    out_a = tmp_path / "bench_a"
    out_b = tmp_path / "bench_b"
    assert main(["bench", str(src), str(out_a), *flags]) == 0
    assert main(["bench", str(src), str(out_b), *flags]) == 0
    printed = capsys.readouterr().out
    for name in ("kmeans", "fcm", "otsu", "optimized"):
        assert name in printed
    rep_a = json.loads((tmp_path / "bench_a.json").read_text())
    rep_b = json.loads((tmp_path / "bench_b.json").read_text())
    assert len(rep_a["entries"]) == 4
    digests_a = {e["name"]: e["labels_sha256"] for e in rep_a["entries"]}
    digests_b = {e["name"]: e["labels_sha256"] for e in rep_b["entries"]}
    assert digests_a == digests_b
    assert (tmp_path / "bench_a.csv").exists()


def test_bench_missing_input_exit_one(tmp_path):
    assert main(["bench", str(tmp_path / "nope.pgm"), str(tmp_path / "r")]) == 1


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------


def test_synth_writes_image_and_truth(tmp_path):
    stem = tmp_path / "ph"
    assert main(["synth", str(stem)]) == 0
    assert (tmp_path / "ph.pgm").exists()
    assert (tmp_path / "ph_truth.pgm").exists()
    assert load_image(f"{stem}.pgm").shape == (240, 320)


def test_synth_seed_repeat_identical_bytes(tmp_path):
    args = ["--seed", "9", "--width", "64", "--height", "48"]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["synth", str(a), *args]) == 0
    assert main(["synth", str(b), *args]) == 0
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    assert (
        tmp_path / "a_truth.pgm"
    ).read_bytes() == (tmp_path / "b_truth.pgm").read_bytes()


def test_synth_zero_veins_blank_truth(tmp_path):
    stem = tmp_path / "flat"
    code = main(["synth", str(stem), "--width", "64", "--height", "48", "--vein-count", "0"])
    assert code == 0
    assert load_mask(f"{stem}_truth.pgm").area() == 0


def test_synth_invalid_spec_exit_one(tmp_path, capsys):
    stem = tmp_path / "bad"
    code = main(
        ["synth", str(stem), "--vein-width-min", "3.0", "--vein-width-max", "2.0"]
    )
    assert code == 1
    assert "vein: error" in capsys.readouterr().err
    assert not (tmp_path / "bad.pgm").exists()
