"""Image ingestion: decode, integral box downscale and grayscale conversion.

Rasters are held as read-only numpy arrays, row-major, ``uint8``.
Rounding is half-up throughout and is done in integer arithmetic so that
results are bit-exact across platforms.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

WORKING_SIZE = (512, 384)

# Rec.601 luma weights, in thousandths
_LUMA = (299, 587, 114)


class ImageError(Exception):
    pass


class UnsupportedFormat(ImageError):
    pass


class CorruptStream(ImageError):
    pass


class NonIntegralFactor(ImageError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.uint8, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RgbImage:
    """24-bit colour raster, ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if p.dtype != np.uint8 and (p.min() < 0 or p.max() > 255):
            raise ValueError("channel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit luma raster, ``pixels`` has shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2:
            raise ValueError(f"expected (h, w) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if p.dtype != np.uint8 and (p.min() < 0 or p.max() > 255):
            raise ValueError("values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class ImageMeta:
    source_path: str
    original_width: int
    original_height: int
    dpi: int | None = None


def decode(data: bytes) -> RgbImage:
    """Decode a PNG or JPEG byte stream, dropping any alpha channel."""
    try:
        im = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat("not a PNG or JPEG stream") from exc
    if im.format not in ("PNG", "JPEG"):
        raise UnsupportedFormat(f"unsupported format {im.format}")
    try:
        im.load()
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptStream(str(exc)) from exc
    return RgbImage(np.asarray(im.convert("RGB")))


def read_image(path: str | Path) -> tuple[RgbImage, ImageMeta]:
    path = Path(path)
    data = path.read_bytes()
    img = decode(data)
    dpi = None
    with Image.open(io.BytesIO(data)) as im:
        if "dpi" in im.info:
            dpi = int(round(im.info["dpi"][0]))
    return img, ImageMeta(str(path), img.width, img.height, dpi)


def encode_png(img: RgbImage | GrayImage | np.ndarray) -> bytes:
    pixels = img.pixels if isinstance(img, (RgbImage, GrayImage)) else np.asarray(img)
    if pixels.dtype == bool:
        im = Image.fromarray(pixels).convert("1")
    else:
        im = Image.fromarray(np.asarray(pixels, dtype=np.uint8))
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def resize_box(img: RgbImage, out_w: int, out_h: int) -> RgbImage:
    """Downscale by an integral factor, averaging each source block."""
    if out_w < 1 or out_h < 1 or out_w > img.width or out_h > img.height:
        raise NonIntegralFactor(
            f"cannot box-resize {img.width}x{img.height} to {out_w}x{out_h}"
        )
    if img.width % out_w or img.height % out_h:
        raise NonIntegralFactor(
            f"{img.width}x{img.height} is not an integer multiple of {out_w}x{out_h}"
        )
    fx, fy = img.width // out_w, img.height // out_h
    n = fx * fy
    blocks = img.pixels.astype(np.int64).reshape(out_h, fy, out_w, fx, 3)
    s = blocks.sum(axis=(1, 3))
    # half-up rounding of s / n
    return RgbImage((2 * s + n) // (2 * n))


def to_grayscale(img: RgbImage) -> GrayImage:
    p = img.pixels.astype(np.int64)
    acc = _LUMA[0] * p[..., 0] + _LUMA[1] * p[..., 1] + _LUMA[2] * p[..., 2]
    return GrayImage((acc + 500) // 1000)


def to_working(img: RgbImage, size: tuple[int, int] = WORKING_SIZE) -> RgbImage:
    """Box-downscale to the working resolution when the factor is integral.

    Images that are already at (or cannot be reduced exactly to) the working
    size are returned unchanged.
    """
    w, h = size
    if (img.width, img.height) == (w, h):
        return img
    if img.width >= w and img.height >= h and img.width % w == 0 and img.height % h == 0:
        return resize_box(img, w, h)
    return img


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle: columns ``x .. x+width-1``, rows ``y .. y+height-1``."""

    x: int
    y: int
    width: int
    height: int

    @property
    def area(self) -> int:
        return self.width * self.height

    def within(self, width: int, height: int) -> bool:
        return (
            self.x >= 0 and self.y >= 0 and self.width >= 1 and self.height >= 1
            and self.x + self.width <= width and self.y + self.height <= height
        )

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.height), slice(self.x, self.x + self.width)
