"""Pipeline configuration: defaults, validation, file parsing, precedence."""

import argparse

import pytest

from veinline.config import PipelineConfig, parse_config_file
from veinline.cli import _build_config


def test_defaults_validate_cleanly():
    PipelineConfig().validate()


def test_default_operating_point():
    cfg = PipelineConfig()
    spec = cfg.adjust_spec()
    assert spec.level_count == 5
    assert (spec.l_out, spec.h_out, spec.step) == (0.2, 0.6, 0.1)
    assert cfg.algo == "optimized"
    assert cfg.k_override is None
    assert cfg.block_size == 16
    assert cfg.freq_window == 32


def test_with_overrides_replaces_and_rejects_unknown():
    cfg = PipelineConfig().with_overrides({"block_size": 8, "freq_window": 16})
    assert cfg.block_size == 8
    assert cfg.freq_window == 16
    assert PipelineConfig().block_size == 16  # original untouched
    with pytest.raises(ValueError, match="unknown config key"):
        PipelineConfig().with_overrides({"blocksize": 8})


@pytest.mark.parametrize(
    "field, value",
    [
        ("normalize_window", 4),
        ("normalize_window", 1),
        ("wiener_window", 2),
        ("normalize_mean", 1.5),
        ("normalize_var", 0.0),
        ("adjust_low_in", 0.9),  # low >= high
        ("quantize_step", 0.0),
        ("algo", "voronoi"),
        ("k_override", 0),
        ("max_iter", 0),
        ("fcm_m", 1.0),
        ("fcm_eps", 0.0),
        ("filter_sigma", 0.0),
        ("kernel_size", 4),
        ("curvature_sigma", -1.0),
        ("binarize_percentile", 0.0),
        ("binarize_percentile", 101.0),
        ("block_size", 2),
        ("freq_window", 16),  # < 2 * block_size
        ("se_length", 0),
        ("min_area", -1),
        ("bench_k", 0),
        ("bench_reps", 2),
    ],
)
def test_validate_rejects_bad_values(field, value):
    cfg = PipelineConfig().with_overrides({field: value})
    with pytest.raises(ValueError):
        cfg.validate()


def test_validate_error_names_the_key():
    cfg = PipelineConfig().with_overrides({"binarize_percentile": 0.0})
    with pytest.raises(ValueError, match="binarize_percentile"):
        cfg.validate()


# --------------------------------------------------------------------------
# config file parsing
# --------------------------------------------------------------------------


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_config_file_types_and_comments(tmp_path):
    path = write_cfg(
        tmp_path,
        """
        # operating point for the small-image runs
        preprocess_enabled = yes
        block_size = 8          # analysis block
        freq_window = 16
        quantize_step = 0.05
        algo = otsu

        k_override = 7
        """,
    )
    got = parse_config_file(path)
    assert got == {
        "preprocess_enabled": True,
        "block_size": 8,
        "freq_window": 16,
        "quantize_step": 0.05,
        "algo": "otsu",
        "k_override": 7,
    }


def test_parse_config_file_optional_int_accepts_none(tmp_path):
    path = write_cfg(tmp_path, "k_override = none\n")
    assert parse_config_file(path) == {"k_override": None}


def test_parse_config_file_boolean_spellings(tmp_path):
    for text, expect in [("true", True), ("0", False), ("off", False), ("1", True)]:
        path = write_cfg(tmp_path, f"preprocess_enabled = {text}\n")
        assert parse_config_file(path) == {"preprocess_enabled": expect}


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("no_such_key = 3", "unknown config key"),
        ("just a line without equals", "key = value"),
        ("block_size = eight", "integer"),
        ("preprocess_enabled = maybe", "boolean"),
        ("filter_sigma = wide", "number"),
    ],
)
def test_parse_config_file_rejects_bad_lines(tmp_path, line, fragment):
    path = write_cfg(tmp_path, line + "\n")
    with pytest.raises(ValueError, match=fragment):
        parse_config_file(path)


def test_parse_config_file_reports_line_numbers(tmp_path):
    path = write_cfg(tmp_path, "block_size = 8\n\nbogus_key = 1\n")
    with pytest.raises(ValueError, match=r":3:"):
        parse_config_file(path)


# --------------------------------------------------------------------------
# precedence: flags > file > defaults
# --------------------------------------------------------------------------


def test_flag_beats_file_beats_default(tmp_path):
    path = write_cfg(tmp_path, "block_size = 12\nfreq_window = 64\n")
    ns = argparse.Namespace(config=path, block_size="8")
    cfg = _build_config(ns)
    assert cfg.block_size == 8  # flag wins
    assert cfg.freq_window == 64  # file wins over default
    assert cfg.bench_k == 5  # untouched default


def test_env_var_names_default_config(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, "bench_k = 3\n")
    monkeypatch.setenv("VEIN_CONFIG", path)
    cfg = _build_config(argparse.Namespace(config=None))
    assert cfg.bench_k == 3


def test_explicit_config_flag_beats_env_var(tmp_path, monkeypatch):
    env_path = write_cfg(tmp_path, "bench_k = 3\n", name="env.cfg")
    arg_path = write_cfg(tmp_path, "bench_k = 4\n", name="arg.cfg")
    monkeypatch.setenv("VEIN_CONFIG", env_path)
    cfg = _build_config(argparse.Namespace(config=arg_path))
    assert cfg.bench_k == 4


def test_build_config_validates_merged_result(tmp_path):
    path = write_cfg(tmp_path, "block_size = 2\n")
    with pytest.raises(ValueError, match="block_size"):
        _build_config(argparse.Namespace(config=path))


def test_flag_can_clear_k_override(tmp_path):
    path = write_cfg(tmp_path, "k_override = 4\n")
    ns = argparse.Namespace(config=path, k_override="none")
    assert _build_config(ns).k_override is None
