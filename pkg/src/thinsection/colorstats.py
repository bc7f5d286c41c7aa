"""Sample statistics, RGB histograms and the colour-variance score used to
flag accessory-mineral cells.

Integer pixel data are accumulated exactly (int64) and divided once at the
end, so histogram-based and pixel-based routes give identical floats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imgcore import Rect, RgbImage


class EmptySample(ValueError):
    pass


class RegionOutOfBounds(ValueError):
    pass


class VarianceMode(str, enum.Enum):
    CHROMA = "chroma"
    PER_CHANNEL_MAX = "per_channel_max"
    PER_CHANNEL_MEAN = "per_channel_mean"

    @classmethod
    def parse(cls, value: "str | VarianceMode") -> "VarianceMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    sum_sq_dev: float

    @property
    def variance(self) -> float:
        return self.sum_sq_dev / self.n


def stats(values: Sequence[float]) -> SampleStats:
    """Mean and sum of squared deviations, computed in two passes.

    ``sum_sq_dev`` is the raw sum with no 1/n factor; ``variance`` divides it
    by n (population variance).
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySample("need at least one value")
    mean = float(x.sum() / x.size)
    d = x - mean
    return SampleStats(int(x.size), mean, float(np.dot(d, d)))


@dataclass(frozen=True, eq=False)
class RgbHistogram:
    bins: np.ndarray  # shape (3, 256), int64

    @property
    def n(self) -> int:
        return int(self.bins[0].sum())

    def channel_variance(self, channel: int) -> float:
        h = self.bins[channel]
        n = int(h.sum())
        v = np.arange(256, dtype=np.int64)
        s1 = int(np.dot(h, v))
        s2 = int(np.dot(h, v * v))
        return (n * s2 - s1 * s1) / (n * n)

    def __eq__(self, other):
        if not isinstance(other, RgbHistogram):
            return NotImplemented
        return np.array_equal(self.bins, other.bins)


def _region_pixels(img: RgbImage, region: Rect | None) -> np.ndarray:
    if region is None:
        return img.pixels
    if not region.within(img.width, img.height):
        raise RegionOutOfBounds(f"{region} not inside {img.width}x{img.height} image")
    return img.pixels[region.slices()]


def histogram(img: RgbImage, region: Rect | None = None) -> RgbHistogram:
    p = _region_pixels(img, region).reshape(-1, 3)
    bins = np.stack([np.bincount(p[:, c], minlength=256) for c in range(3)])
    return RgbHistogram(bins.astype(np.int64))


@dataclass(frozen=True)
class ColourVarianceScore:
    value: float
    mode: VarianceMode


def chroma_numerator(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel ``9 * var(R, G, B)`` as an exact integer array."""
    p = pixels.astype(np.int64)
    s1 = p.sum(axis=-1)
    s2 = (p * p).sum(axis=-1)
    return 3 * s2 - s1 * s1


def colour_variance(
    img: RgbImage,
    region: Rect | None = None,
    mode: VarianceMode | str = VarianceMode.CHROMA,
) -> ColourVarianceScore:
    """Colourfulness of a region.

    ``chroma`` averages, over pixels, the population variance of each pixel's
    three channel values; it is zero exactly for gray regions. The
    per-channel modes take the intensity variance of each channel over the
    region (via the histogram) and reduce with max or mean.
    """
    mode = VarianceMode.parse(mode)
    if mode is VarianceMode.CHROMA:
        p = _region_pixels(img, region)
        n = p.shape[0] * p.shape[1]
        value = int(chroma_numerator(p).sum()) / (9 * n)
    else:
        h = histogram(img, region)
        per_channel = [h.channel_variance(c) for c in range(3)]
        value = max(per_channel) if mode is VarianceMode.PER_CHANNEL_MAX else sum(per_channel) / 3
    return ColourVarianceScore(value, mode)


def block_sums(a: np.ndarray, row_starts: Sequence[int], col_starts: Sequence[int]) -> np.ndarray:
    """Sum ``a`` over the tiles whose top-left corners are given by the starts."""
    out = np.add.reduceat(a, np.asarray(row_starts), axis=0)
    return np.add.reduceat(out, np.asarray(col_starts), axis=1)


def cell_colour_variances(
    img: RgbImage,
    row_starts: Sequence[int],
    col_starts: Sequence[int],
    mode: VarianceMode | str = VarianceMode.CHROMA,
) -> np.ndarray:
    """Colour-variance score for every tile of a grid at once.

    Equivalent to calling :func:`colour_variance` on each tile.
    """
    mode = VarianceMode.parse(mode)
    h, w = img.height, img.width
    heights = np.diff(np.append(row_starts, h))
    widths = np.diff(np.append(col_starts, w))
    n = np.outer(heights, widths).astype(np.int64)
    if mode is VarianceMode.CHROMA:
        num = block_sums(chroma_numerator(img.pixels), row_starts, col_starts)
        return num / (9 * n)
    p = img.pixels.astype(np.int64)
    var = np.empty((3, len(row_starts), len(col_starts)))
    for c in range(3):
        s1 = block_sums(p[..., c], row_starts, col_starts)
        s2 = block_sums(p[..., c] * p[..., c], row_starts, col_starts)
        var[c] = (n * s2 - s1 * s1) / (n * n)
    if mode is VarianceMode.PER_CHANNEL_MAX:
        return var.max(axis=0)
    return var.sum(axis=0) / 3
