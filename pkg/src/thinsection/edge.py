"""Canny edge detection: Gaussian blur, Sobel gradients, non-maximum
suppression and hysteresis linking.

Borders are replicate-padded at every stage. Hysteresis thresholds are
fractions of the largest suppressed magnitude, so ``t_high=0.01`` means
"1% of the strongest edge in this image".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import GrayImage

# Sector codes for gradient orientation (degrees, modulo 180).
SECTOR_0, SECTOR_45, SECTOR_90, SECTOR_135 = 0, 1, 2, 3

# (drow, dcol) of the neighbour lying along the gradient for each sector;
# the opposite neighbour is the negation. Rows grow downwards.
_SECTOR_STEP = {
    SECTOR_0: (0, 1),
    SECTOR_45: (1, 1),
    SECTOR_90: (1, 0),
    SECTOR_135: (1, -1),
}

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T.copy()


class ImageTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class CannyParams:
    t_high: float = 0.01
    sigma: float = 1.4
    low_ratio: float = 0.4

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.t_high <= 1:
            raise ValueError(f"t_high must lie in (0, 1], got {self.t_high}")
        if not 0 < self.low_ratio < 1:
            raise ValueError(f"low_ratio must lie in (0, 1), got {self.low_ratio}")


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    sector: np.ndarray

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def height(self) -> int:
        return self.gx.shape[0]


@dataclass(frozen=True, eq=False)
class EdgeMap:
    mask: np.ndarray

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def fraction(self) -> float:
        return self.count / self.mask.size

    def __eq__(self, other):
        if not isinstance(other, EdgeMap):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)


def _as_float(raster) -> np.ndarray:
    if isinstance(raster, GrayImage):
        raster = raster.pixels
    return np.asarray(raster, dtype=np.float64)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D normalised Gaussian of radius ``ceil(3 * sigma)``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(_as_float(img), k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def orientation_sector(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    return (np.floor((angle + 22.5) / 45.0).astype(np.int64) % 4).astype(np.uint8)


def sobel_gradients(raster) -> GradientField:
    r = _as_float(raster)
    if r.shape[0] < 3 or r.shape[1] < 3:
        raise ImageTooSmall(f"Sobel needs at least 3x3 pixels, got {r.shape[1]}x{r.shape[0]}")
    gx = ndimage.correlate(r, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(r, _SOBEL_Y, mode="nearest")
    return GradientField(gx, gy, np.hypot(gx, gy), orientation_sector(gx, gy))


def _shifted(a: np.ndarray, drow: int, dcol: int) -> np.ndarray:
    """``out[r, c] = a[r + drow, c + dcol]`` with indices clamped to the border."""
    h, w = a.shape
    rows = np.clip(np.arange(h) + drow, 0, h - 1)
    cols = np.clip(np.arange(w) + dcol, 0, w - 1)
    return a[np.ix_(rows, cols)]


def _in_bounds(shape: tuple[int, int], drow: int, dcol: int) -> np.ndarray:
    h, w = shape
    r = np.arange(h)[:, None] + drow
    c = np.arange(w)[None, :] + dcol
    return (r >= 0) & (r < h) & (c >= 0) & (c < w)


def non_max_suppress(g: GradientField) -> np.ndarray:
    """Thin the magnitude to ridge pixels along each pixel's gradient sector.

    A pixel survives when it is >= both neighbours along its sector. On an
    exact tie with the backward neighbour (the one at ``-step``) the backward
    pixel wins, so a flat plateau keeps exactly one pixel instead of all or
    none. Out-of-image neighbours replicate the pixel itself and never block.
    """
    mag = g.magnitude
    keep = np.zeros(mag.shape, dtype=bool)
    for sector, (dr, dc) in _SECTOR_STEP.items():
        fwd = _shifted(mag, dr, dc)
        bwd = _shifted(mag, -dr, -dc)
        tied_back = (mag == bwd) & _in_bounds(mag.shape, -dr, -dc)
        local_max = (mag >= fwd) & (mag >= bwd) & ~tied_back
        keep |= (g.sector == sector) & local_max
    return np.where(keep, mag, 0.0)


_EIGHT = np.ones((3, 3), dtype=bool)


def hysteresis(suppressed: np.ndarray, t_high: float, low_ratio: float = 0.4) -> EdgeMap:
    s = np.asarray(suppressed, dtype=np.float64)
    peak = s.max() if s.size else 0.0
    if peak <= 0:
        return EdgeMap(np.zeros(s.shape, dtype=bool))
    strong_t = t_high * peak
    weak = s >= low_ratio * strong_t
    strong = s >= strong_t
    labels, n = ndimage.label(weak, structure=_EIGHT)
    if n == 0:
        return EdgeMap(np.zeros(s.shape, dtype=bool))
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return EdgeMap(seeded[labels])


def suppressed_magnitude(img, sigma: float = 1.4) -> np.ndarray:
    """Blur, differentiate and thin; everything in Canny except hysteresis."""
    return non_max_suppress(sobel_gradients(gaussian_blur(img, sigma)))


def canny(img, p: CannyParams = CannyParams()) -> EdgeMap:
    return hysteresis(suppressed_magnitude(img, p.sigma), p.t_high, p.low_ratio)
