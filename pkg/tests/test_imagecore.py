"""Image value types and bit-exact PGM/PNG I/O."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veinline.imagecore import (
    BinaryMask,
    CorruptImageError,
    GrayImage,
    UnsupportedImageFormat,
    load_image,
    load_mask,
    quantize_u8,
    save_image,
    save_mask,
)

from oracles import round_half_up_u8


def pgm_bytes(width, height, samples):
    header = f"P5\n{width} {height}\n255\n".encode()
    return header + bytes(samples)


# --------------------------------------------------------------------------
# value types
# --------------------------------------------------------------------------


def test_gray_image_basic_properties():
    img = GrayImage(np.full((3, 5), 0.25))
    assert img.height == 3
    assert img.width == 5
    assert img.shape == (3, 5)
    assert not img.pixels.flags.writeable


@pytest.mark.parametrize(
    "bad",
    [
        np.full((2, 2), 1.5),
        np.full((2, 2), -0.1),
        np.full((2, 2), np.nan),
        np.zeros((2, 2, 2)),
        np.zeros((0, 3)),
    ],
)
def test_gray_image_rejects_bad_grids(bad):
    with pytest.raises(ValueError):
        GrayImage(bad)


def test_binary_mask_rejects_non_binary():
    with pytest.raises(ValueError):
        BinaryMask(np.full((2, 2), 2))


def test_binary_mask_area():
    mask = BinaryMask(np.eye(4, dtype=np.uint8))
    assert mask.area() == 4


# --------------------------------------------------------------------------
# quantization rule
# --------------------------------------------------------------------------


def test_quantize_u8_known_points():
    vals = np.array([[0.0, 1.0, 0.5, 0.4999]])
    assert quantize_u8(vals).tolist() == [[0, 255, 128, 127]]


@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
def test_quantize_u8_matches_round_half_up_oracle(x):
    got = int(quantize_u8(np.array([[x]]))[0, 0])
    assert got == round_half_up_u8(x)


# --------------------------------------------------------------------------
# PGM loading
# --------------------------------------------------------------------------


def test_load_pgm_scales_samples(tmp_path):
    path = tmp_path / "t.pgm"
    path.write_bytes(pgm_bytes(2, 2, [0, 255, 128, 64]))
    img = load_image(path)
    expect = np.array([[0.0, 1.0], [128 / 255, 64 / 255]])
    np.testing.assert_array_equal(img.pixels, expect)


def test_load_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.pgm")


def test_load_p6_rejected_as_unsupported(tmp_path):
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(UnsupportedImageFormat):
        load_image(path)


def test_load_maxval_other_than_255_rejected(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(UnsupportedImageFormat):
        load_image(path)


@pytest.mark.parametrize(
    "data",
    [
        b"P5\n2 2\n",  # truncated header
        b"P5\nx 2\n255\n" + bytes(4),  # non-numeric field
        b"P5\n2 2\n255\n" + bytes(3),  # short payload
        b"P5\n0 2\n255\n",  # zero dimension
    ],
)
def test_load_corrupt_pgm_raises_corrupt_error(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(CorruptImageError):
        load_image(path)


def test_load_unrecognized_blob_rejected(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"\x00\x01\x02garbage")
    with pytest.raises(UnsupportedImageFormat):
        load_image(path)


# --------------------------------------------------------------------------
# PGM saving and the round trip
# --------------------------------------------------------------------------


def test_save_image_bytes(tmp_path):
    img = GrayImage(np.array([[1.0, 0.5], [0.4999, 0.0]]))
    path = tmp_path / "o.pgm"
    save_image(img, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    assert list(data[-4:]) == [255, 128, 127, 0]


def test_round_trip_identity_on_quantized_image(tmp_path):
    rng = np.random.default_rng(11)
    quantized = quantize_u8(rng.uniform(0, 1, size=(7, 9))) / 255.0
    img = GrayImage(quantized)
    path = tmp_path / "rt.pgm"
    save_image(img, path)
    back = load_image(path)
    np.testing.assert_array_equal(back.pixels, img.pixels)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_loaded_pixels_always_in_unit_range(tmp_path_factory, h, w, seed):
    rng = np.random.default_rng(seed)
    body = rng.integers(0, 256, size=h * w, dtype=np.uint8)
    path = tmp_path_factory.mktemp("pgm") / "r.pgm"
    path.write_bytes(pgm_bytes(w, h, body.tolist()))
    img = load_image(path)
    assert img.pixels.min() >= 0.0
    assert img.pixels.max() <= 1.0
    assert img.shape == (h, w)


# --------------------------------------------------------------------------
# masks
# --------------------------------------------------------------------------


def test_save_mask_byte_values(tmp_path):
    checker = BinaryMask(np.array([[1, 0], [0, 1]], dtype=np.uint8))
    path = tmp_path / "m.pgm"
    save_mask(checker, path)
    assert list(path.read_bytes()[-4:]) == [255, 0, 0, 255]

    save_mask(BinaryMask(np.ones((2, 2), dtype=np.uint8)), path)
    assert list(path.read_bytes()[-4:]) == [255] * 4
    save_mask(BinaryMask(np.zeros((2, 2), dtype=np.uint8)), path)
    assert list(path.read_bytes()[-4:]) == [0] * 4


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    mask = BinaryMask(rng.integers(0, 2, size=(6, 5)).astype(np.uint8))
    path = tmp_path / "m.pgm"
    save_mask(mask, path)
    back = load_mask(path)
    np.testing.assert_array_equal(back.bits, mask.bits)


# --------------------------------------------------------------------------
# PNG input
# --------------------------------------------------------------------------


def test_load_png_grayscale(tmp_path):
    from PIL import Image

    arr = np.arange(16, dtype=np.uint8).reshape(4, 4) * 16
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    path = tmp_path / "g.png"
    path.write_bytes(buf.getvalue())
    img = load_image(path)
    np.testing.assert_allclose(img.pixels, arr / 255.0)


def test_load_png_rgb_uses_luma_weights(tmp_path):
    from PIL import Image

    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[..., 0] = 200  # pure red corner of the cube
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    path = tmp_path / "c.png"
    path.write_bytes(buf.getvalue())
    img = load_image(path)
    np.testing.assert_allclose(img.pixels, np.full((2, 2), 0.299 * 200 / 255))


def test_load_png_rejects_palette_mode(tmp_path):
    from PIL import Image

    arr = np.zeros((2, 2), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").convert("P").save(buf, format="PNG")
    path = tmp_path / "p.png"
    path.write_bytes(buf.getvalue())
    with pytest.raises(UnsupportedImageFormat):
        load_image(path)
