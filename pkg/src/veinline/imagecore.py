"""Core image value types and bit-exact file I/O.

Grayscale images are carried as float64 grids in [0, 1]; binary masks as
uint8 grids of {0, 1}. The canonical on-disk interchange format is binary
PGM (P5, maxval 255) because it is trivially auditable byte by byte. PNG
(8-bit grayscale or RGB) is accepted for input convenience only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GrayImage",
    "BinaryMask",
    "ImageFormatError",
    "UnsupportedImageFormat",
    "CorruptImageError",
    "load_image",
    "save_image",
    "save_mask",
    "load_mask",
    "quantize_u8",
]

# RGB -> gray conversion weights (ITU-R 601 luma).
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(Exception):
    """Base class for image decoding problems."""


class UnsupportedImageFormat(ImageFormatError):
    """The file is recognizable but not an accepted format."""


class CorruptImageError(ImageFormatError):
    """The file claims an accepted format but its contents are broken."""


@dataclass(frozen=True)
class GrayImage:
    """Immutable 2-D grid of intensities in [0, 1], indexed (row, col)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D pixel grid, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixel values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"pixel values must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class BinaryMask:
    """Immutable 2-D grid of {0, 1} values, dimensions matching its source."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D bit grid, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be at least 1x1, got {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask elements must be exactly 0 or 1")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def area(self) -> int:
        """Number of set bits."""
        return int(self.bits.sum())


def quantize_u8(pixels: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities onto 8-bit samples, rounding half up.

    This single rule is shared by the PGM writer and the histogram-based
    thresholder so both agree on which bin a borderline intensity lands in.
    """
    return np.clip(np.floor(pixels * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _read_pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Parse a P5 header; returns (width, height, maxval, payload offset)."""
    if not data.startswith(b"P5"):
        raise UnsupportedImageFormat("not a P5 PGM (bad magic)")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token:
            raise CorruptImageError("truncated PGM header")
        try:
            fields.append(int(token))
        except ValueError:
            raise CorruptImageError(f"non-numeric PGM header field {token!r}") from None
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise CorruptImageError("missing whitespace after PGM maxval")
    pos += 1  # single whitespace byte separates header from samples
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CorruptImageError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedImageFormat(f"only 8-bit PGM (maxval 255) supported, got {maxval}")
    return width, height, maxval, pos


def _load_pgm(data: bytes) -> np.ndarray:
    width, height, _, offset = _read_pgm_header(data)
    expected = width * height
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise CorruptImageError(
            f"PGM payload has {len(payload)} bytes, expected {expected}"
        )
    samples = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return samples.astype(np.float64) / 255.0


def _load_png(data: bytes) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"broken PNG stream: {exc}") from exc
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode == "RGB":
        r, g, b = (arr[..., c].astype(np.float64) for c in range(3))
        wr, wg, wb = LUMA_WEIGHTS
        return (wr * r + wg * g + wb * b) / 255.0
    raise UnsupportedImageFormat(
        f"PNG mode {mode!r} not supported (8-bit grayscale or RGB only)"
    )


def load_image(path: str | Path) -> GrayImage:
    """Load an 8-bit grayscale image from PGM (P5) or PNG.

    RGB PNG is converted with the 0.299/0.587/0.114 luma weights. Every
    8-bit sample v maps to intensity v/255.

    Raises FileNotFoundError for a missing file, UnsupportedImageFormat for
    formats outside the contract, CorruptImageError for broken contents.
    """
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        pixels = _load_pgm(data)
    elif data.startswith(b"\x89PNG\r\n\x1a\n"):
        pixels = _load_png(data)
    elif data[:2] in (b"P1", b"P2", b"P3", b"P4", b"P6"):
        raise UnsupportedImageFormat(
            f"netpbm variant {data[:2].decode('ascii', 'replace')} not supported, "
            "only binary grayscale P5"
        )
    else:
        raise UnsupportedImageFormat("unrecognized image format (want P5 PGM or PNG)")
    # Clamp defensively: uint8/255 is already in range, division is exact.
    return GrayImage(pixels)


def save_image(img: GrayImage, path: str | Path) -> None:
    """Write a GrayImage as binary PGM, sample = round-half-up(intensity*255)."""
    samples = quantize_u8(img.pixels)
    _write_pgm(samples, path)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a BinaryMask as binary PGM with bit 1 -> 255 and bit 0 -> 0."""
    samples = (mask.bits * np.uint8(255)).astype(np.uint8)
    _write_pgm(samples, path)


def load_mask(path: str | Path) -> BinaryMask:
    """Load a mask saved by save_mask; any nonzero sample counts as set."""
    img = load_image(path)
    return BinaryMask((img.pixels > 0).astype(np.uint8))


def _write_pgm(samples: np.ndarray, path: str | Path) -> None:
    height, width = samples.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + samples.tobytes())
