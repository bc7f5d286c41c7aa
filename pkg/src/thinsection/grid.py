"""Grid partitioning, per-cell mineral labelling and the image-level tally."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .colorstats import VarianceMode, block_sums, cell_colour_variances
from .edge import CannyParams, EdgeMap, canny
from .imgcore import GrayImage, Rect, RgbImage, to_grayscale

STANDARD_GRIDS = (4, 8, 16, 32)


class GridTooFine(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class CellLabel(str, enum.Enum):
    QUARTZ = "Q"
    ACCESSORY = "A"
    OTHER = "O"


@dataclass(frozen=True)
class GridSpec:
    """``cells_x`` by ``cells_y`` tiling; the last row/column takes any remainder."""

    image_width: int
    image_height: int
    cells_x: int
    cells_y: int

    @property
    def cell_width(self) -> int:
        return self.image_width // self.cells_x

    @property
    def cell_height(self) -> int:
        return self.image_height // self.cells_y

    @property
    def total_cells(self) -> int:
        return self.cells_x * self.cells_y

    @property
    def col_starts(self) -> np.ndarray:
        return np.arange(self.cells_x) * self.cell_width

    @property
    def row_starts(self) -> np.ndarray:
        return np.arange(self.cells_y) * self.cell_height

    def cell_rect(self, row: int, col: int) -> Rect:
        x, y = col * self.cell_width, row * self.cell_height
        w = self.image_width - x if col == self.cells_x - 1 else self.cell_width
        h = self.image_height - y if row == self.cells_y - 1 else self.cell_height
        return Rect(x, y, w, h)

    def cells(self):
        for r in range(self.cells_y):
            for c in range(self.cells_x):
                yield self.cell_rect(r, c)

    def cell_areas(self) -> np.ndarray:
        heights = np.diff(np.append(self.row_starts, self.image_height))
        widths = np.diff(np.append(self.col_starts, self.image_width))
        return np.outer(heights, widths)


def make_grid(w: int, h: int, g: int) -> GridSpec:
    if g < 1:
        raise ValueError(f"grid size must be >= 1, got {g}")
    if g > min(w, h):
        raise GridTooFine(f"{g}x{g} grid is finer than a {w}x{h} image")
    return GridSpec(w, h, g, g)


@dataclass(frozen=True)
class ParamSet:
    grid: int = 16
    t_nonzero: float = 0.02
    t_variance: float = 200.0
    canny: CannyParams = field(default_factory=lambda: CannyParams(t_high=0.02))
    variance_mode: VarianceMode = VarianceMode.CHROMA

    def __post_init__(self):
        if self.grid < 1:
            raise ValueError(f"grid must be >= 1, got {self.grid}")
        if not 0 <= self.t_nonzero <= 1:
            raise ValueError(f"t_nonzero must lie in [0, 1], got {self.t_nonzero}")
        if not self.t_variance >= 0:
            raise ValueError(f"t_variance must be >= 0, got {self.t_variance}")
        object.__setattr__(self, "variance_mode", VarianceMode.parse(self.variance_mode))

    @property
    def sort_key(self) -> tuple:
        return (self.grid, self.t_nonzero, self.t_variance, self.canny.t_high)


def classify_cell(edge_fraction: float, colour_variance: float, p: ParamSet) -> CellLabel:
    # a colourful cell cannot be quartz, so colour is tested first
    if colour_variance > p.t_variance:
        return CellLabel.ACCESSORY
    if edge_fraction <= p.t_nonzero:
        return CellLabel.QUARTZ
    return CellLabel.OTHER


@dataclass(frozen=True, eq=False)
class CellLabelGrid:
    cells_x: int
    cells_y: int
    labels: np.ndarray  # (cells_y, cells_x) of single-letter codes
    edge_fraction: np.ndarray
    colour_variance: np.ndarray

    def label(self, row: int, col: int) -> CellLabel:
        return CellLabel(self.labels[row, col])

    def count(self, label: CellLabel) -> int:
        return int((self.labels == label.value).sum())

    def __eq__(self, other):
        if not isinstance(other, CellLabelGrid):
            return NotImplemented
        return (
            self.cells_x == other.cells_x and self.cells_y == other.cells_y
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.edge_fraction, other.edge_fraction)
            and np.array_equal(self.colour_variance, other.colour_variance)
        )

    def to_dict(self) -> dict:
        return {
            "cells_x": self.cells_x,
            "cells_y": self.cells_y,
            "labels": "".join(self.labels.ravel().tolist()),
            "edge_fraction": [round(float(v), 6) for v in self.edge_fraction.ravel()],
            "colour_variance": [round(float(v), 6) for v in self.colour_variance.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "CellLabelGrid":
        shape = (d["cells_y"], d["cells_x"])
        return cls(
            d["cells_x"],
            d["cells_y"],
            np.array(list(d["labels"]), dtype="<U1").reshape(shape),
            np.array(d["edge_fraction"], dtype=np.float64).reshape(shape),
            np.array(d["colour_variance"], dtype=np.float64).reshape(shape),
        )


@dataclass(frozen=True)
class MineralPercentages:
    quartz_cells: int
    accessory_cells: int
    total_cells: int

    @property
    def quartz_fraction(self) -> float:
        return self.quartz_cells / self.total_cells

    @property
    def accessory_fraction(self) -> float:
        return self.accessory_cells / self.total_cells

    @property
    def quartz_pct(self) -> float:
        return 100.0 * self.quartz_fraction

    @property
    def accessory_pct(self) -> float:
        return 100.0 * self.accessory_fraction


def cell_edge_fractions(edges: EdgeMap, spec: GridSpec) -> np.ndarray:
    counts = block_sums(edges.mask.astype(np.int64), spec.row_starts, spec.col_starts)
    return counts / spec.cell_areas()


def label_cells(
    edge_fraction: np.ndarray, colour_variance: np.ndarray, p: ParamSet
) -> tuple[CellLabelGrid, MineralPercentages]:
    """Vectorised :func:`classify_cell` over precomputed per-cell scores."""
    labels = np.where(
        colour_variance > p.t_variance,
        CellLabel.ACCESSORY.value,
        np.where(edge_fraction <= p.t_nonzero, CellLabel.QUARTZ.value, CellLabel.OTHER.value),
    ).astype("<U1")
    cy, cx = labels.shape
    grid = CellLabelGrid(cx, cy, labels, edge_fraction, colour_variance)
    pct = MineralPercentages(
        grid.count(CellLabel.QUARTZ), grid.count(CellLabel.ACCESSORY), cx * cy
    )
    return grid, pct


def classify_image(
    rgb: RgbImage, gray: GrayImage | None, p: ParamSet, edges: EdgeMap | None = None
) -> tuple[CellLabelGrid, MineralPercentages]:
    """Label every grid cell of an image and tally quartz/accessory fractions.

    Canny runs once over the whole grayscale image; ``edges`` may be passed
    to reuse a previously computed map.
    """
    if gray is None:
        gray = to_grayscale(rgb)
    if (rgb.width, rgb.height) != (gray.width, gray.height):
        raise DimensionMismatch(
            f"RGB is {rgb.width}x{rgb.height} but gray is {gray.width}x{gray.height}"
        )
    spec = make_grid(rgb.width, rgb.height, p.grid)
    if edges is None:
        edges = canny(gray, p.canny)
    elif (edges.width, edges.height) != (gray.width, gray.height):
        raise DimensionMismatch("edge map does not match image size")
    ef = cell_edge_fractions(edges, spec)
    cv = cell_colour_variances(rgb, spec.row_starts, spec.col_starts, p.variance_mode)
    return label_cells(ef, cv, p)
