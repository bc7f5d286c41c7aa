"""Seeded synthetic thin-section images with exact per-cell ground truth.

Three stand-in textures are rendered on a cell-aligned layout:

* quartz-like: flat, nearly colourless, only +/-1 luminance noise;
* accessory-like: saturated, mottled colour;
* feldspar-like: gray lamellar stripes (lots of edges, no colour).

Non-quartz cells are drawn inset by a few pixels inside a quartz-toned
margin, so the step at a region boundary sits inside the non-quartz cell and
never spills edge pixels into a neighbouring quartz cell.

Randomness comes from numpy's PCG64 bit generator; a (layout, seed) pair
always renders the same bytes.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .grid import CellLabel
from .imgcore import Rect, RgbImage, WORKING_SIZE, encode_png
from .petro import Rock, classify_rock
from .sweep import CorpusEntry

ACCESSORY_PALETTE = (
    (190, 40, 45),
    (40, 150, 60),
    (60, 80, 200),
    (210, 170, 30),
    (150, 50, 160),
)

# Declared cell fractions (percent) chosen well inside a single QAPF row.
ROCK_WINDOWS = {
    Rock.GRANITE: ((52.0, 58.0), (8.0, 17.0)),
    Rock.ADAMELLITE: ((7.0, 13.0), (15.0, 30.0)),
    Rock.TONALITE: ((25.0, 45.0), (25.0, 37.0)),
    Rock.DIORITE: ((0.0, 0.0), (24.0, 45.0)),
}

# Grain size per class, as the grid at which regions are laid out. Finer
# layouts mean smaller grains.
DEFAULT_GRAINS = {
    Rock.GRANITE: 16,
    Rock.ADAMELLITE: 16,
    Rock.TONALITE: 32,
    Rock.DIORITE: 8,
}


class AmbiguousTruth(ValueError):
    pass


class RegionKind(str, enum.Enum):
    QUARTZ_LIKE = "quartz"
    ACCESSORY_LIKE = "accessory"
    FELDSPAR_LIKE = "feldspar"

    @property
    def label(self) -> CellLabel:
        return {
            RegionKind.QUARTZ_LIKE: CellLabel.QUARTZ,
            RegionKind.ACCESSORY_LIKE: CellLabel.ACCESSORY,
            RegionKind.FELDSPAR_LIKE: CellLabel.OTHER,
        }[self]


@dataclass(frozen=True)
class RegionSpec:
    """A rectangle of layout cells (``cells`` is in cell units) and its texture.

    ``base_colour`` of None lets the generator pick one from the seed.
    """

    kind: RegionKind
    cells: Rect
    base_colour: tuple[int, int, int] | None = None
    noise: int | None = None
    stripe_period: int = 6
    stripe_amplitude: int = 60

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "cells": [self.cells.x, self.cells.y, self.cells.width, self.cells.height],
            "base_colour": list(self.base_colour) if self.base_colour else None,
            "noise": self.noise,
            "stripe_period": self.stripe_period,
            "stripe_amplitude": self.stripe_amplitude,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        return cls(
            RegionKind(d["kind"]),
            Rect(*d["cells"]),
            tuple(d["base_colour"]) if d.get("base_colour") else None,
            d.get("noise"),
            d.get("stripe_period", 6),
            d.get("stripe_amplitude", 60),
        )


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    image: RgbImage
    grid: int
    truth_cells: np.ndarray  # (grid, grid) of CellLabel codes
    truth_rock: Rock
    seed: int
    regions: tuple[RegionSpec, ...] = field(default=())

    @property
    def quartz_cells(self) -> int:
        return int((self.truth_cells == CellLabel.QUARTZ.value).sum())

    @property
    def accessory_cells(self) -> int:
        return int((self.truth_cells == CellLabel.ACCESSORY.value).sum())


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _truth_grid(regions, grid: int) -> np.ndarray:
    truth = np.full((grid, grid), "", dtype="<U1")
    for reg in regions:
        c = reg.cells
        if not c.within(grid, grid):
            raise ValueError(f"region {c} outside the {grid}x{grid} layout")
        block = truth[c.slices()]
        if (block != "").any():
            raise ValueError(f"region {c} overlaps another region")
        truth[c.slices()] = reg.kind.label.value
    if (truth == "").any():
        raise ValueError("regions do not tile the layout")
    return truth


def truth_rock_for(quartz_cells: int, accessory_cells: int, total: int) -> Rock:
    q = 100.0 * quartz_cells / total
    a = 100.0 * accessory_cells / total
    decision = classify_rock(q, a)
    if len(decision.matched) != 1:
        raise AmbiguousTruth(
            f"quartz {q:.2f}% / accessory {a:.2f}% matches {len(decision.matched)} QAPF rows"
        )
    return decision.matched[0]


def _stripes(h: int, w: int, period: int, orientation: int, phase: int) -> np.ndarray:
    y, x = np.mgrid[0:h, 0:w]
    coord = {0: y, 1: x, 2: x + y, 3: x - y + w}[orientation]
    half = max(period // 2, 1)
    return np.where(((coord + phase) // half) % 2 == 0, 1.0, -1.0)


def _render_region(canvas, reg: RegionSpec, box: Rect, inset: int, rng, quartz_tone):
    rows, cols = box.slices()
    h, w = box.height, box.width
    if reg.kind is RegionKind.QUARTZ_LIKE:
        base = np.array(reg.base_colour or quartz_tone, dtype=np.float64)
        amp = 1 if reg.noise is None else reg.noise
        lum = rng.integers(-amp, amp + 1, size=(h, w)) if amp else np.zeros((h, w))
        canvas[rows, cols] = base + lum[..., None]
        return
    # margin in the quartz tone, texture inside
    margin = rng.integers(-1, 2, size=(h, w))
    canvas[rows, cols] = np.asarray(quartz_tone, dtype=np.float64) + margin[..., None]
    ih, iw = h - 2 * inset, w - 2 * inset
    if ih < 1 or iw < 1:
        raise ValueError(f"cell {w}x{h} too small for inset {inset}")
    inner = (slice(box.y + inset, box.y + inset + ih), slice(box.x + inset, box.x + inset + iw))
    if reg.kind is RegionKind.ACCESSORY_LIKE:
        base = reg.base_colour or ACCESSORY_PALETTE[rng.integers(len(ACCESSORY_PALETTE))]
        amp = 12 if reg.noise is None else reg.noise
        noise = rng.integers(-amp, amp + 1, size=(ih, iw, 3)) if amp else 0
        canvas[inner] = np.asarray(base, dtype=np.float64) + noise
    else:
        gray = reg.base_colour[0] if reg.base_colour else int(rng.integers(110, 171))
        amp = 2 if reg.noise is None else reg.noise
        s = _stripes(ih, iw, reg.stripe_period, int(rng.integers(4)), int(rng.integers(reg.stripe_period)))
        lum = gray + 0.5 * reg.stripe_amplitude * s
        if amp:
            lum = lum + rng.integers(-amp, amp + 1, size=(ih, iw))
        canvas[inner] = lum[..., None]


def generate(
    spec,
    grid: int,
    seed: int,
    size: tuple[int, int] = WORKING_SIZE,
    inset: int = 2,
) -> SyntheticSample:
    """Render a layout of regions on a ``grid`` x ``grid`` cell lattice."""
    regions = tuple(spec)
    truth = _truth_grid(regions, grid)
    q = int((truth == CellLabel.QUARTZ.value).sum())
    a = int((truth == CellLabel.ACCESSORY.value).sum())
    rock = truth_rock_for(q, a, grid * grid)

    w, h = size
    cw, ch = w // grid, h // grid
    if w % grid or h % grid:
        raise ValueError(f"{w}x{h} image does not divide into a {grid}x{grid} layout")
    rng = _rng(seed)
    level = int(rng.integers(200, 236))
    quartz_tone = (level + 1, level, level - 2)
    canvas = np.zeros((h, w, 3), dtype=np.float64)
    for reg in regions:
        c = reg.cells
        box = Rect(c.x * cw, c.y * ch, c.width * cw, c.height * ch)
        _render_region(canvas, reg, box, inset, rng, quartz_tone)
    image = RgbImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))
    return SyntheticSample(image, grid, truth, rock, seed, regions)


def _count_in_window(lo_pct: float, hi_pct: float, total: int, rng) -> int:
    lo = int(np.ceil(lo_pct * total / 100.0))
    hi = int(np.floor(hi_pct * total / 100.0))
    if lo > hi:
        raise AmbiguousTruth(f"no cell count in [{lo_pct}, {hi_pct}]% of {total} cells")
    return int(rng.integers(lo, hi + 1))


def random_layout(rock: Rock, grid: int, rng) -> list[RegionSpec]:
    """Scatter single-cell regions whose counts fall inside ``rock``'s window."""
    total = grid * grid
    (qlo, qhi), (alo, ahi) = ROCK_WINDOWS[rock]
    nq = _count_in_window(qlo, qhi, total, rng)
    na = _count_in_window(alo, ahi, total, rng)
    order = rng.permutation(total).tolist()
    kinds = [RegionKind.FELDSPAR_LIKE] * total
    for i in order[:nq]:
        kinds[i] = RegionKind.QUARTZ_LIKE
    for i in order[nq:nq + na]:
        kinds[i] = RegionKind.ACCESSORY_LIKE
    return [
        RegionSpec(kinds[i], Rect(i % grid, i // grid, 1, 1)) for i in range(total)
    ]


def sample_for_rock(rock: Rock, grid: int, seed: int, **kwargs) -> SyntheticSample:
    layout = random_layout(rock, grid, _rng(seed ^ 0x5EED))
    return generate(layout, grid, seed, **kwargs)


def diorite_trace_sample(seed: int = 0) -> SyntheticSample:
    """8x8 layout with no quartz and 17 accessory cells, a Diorite profile."""
    rng = _rng(seed ^ 0x7AB1E4)
    order = rng.permutation(64)
    accessory = set(order[:17].tolist())
    layout = [
        RegionSpec(
            RegionKind.ACCESSORY_LIKE if i in accessory else RegionKind.FELDSPAR_LIKE,
            Rect(i % 8, i // 8, 1, 1),
        )
        for i in range(64)
    ]
    return generate(layout, 8, seed)


def child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def generate_corpus(
    class_counts: Mapping[Rock | str, int],
    seed: int,
    out_dir: str | Path,
    grains: Mapping[Rock, int] | None = None,
    images_per_section: int = 3,
) -> tuple[Path, list[CorpusEntry]]:
    """Write PNGs plus ``manifest.csv`` (path,rock,section,seed) to ``out_dir``.

    Paths in the manifest are relative to the manifest's directory.
    """
    grains = {**DEFAULT_GRAINS, **(grains or {})}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    index = 0
    for rock in Rock:
        count = {Rock.parse(k): v for k, v in class_counts.items()}.get(rock, 0)
        if count < 0:
            raise ValueError(f"negative count for {rock.value}")
        for i in range(count):
            s = child_seed(seed, index)
            index += 1
            sample = sample_for_rock(rock, grains[rock], s)
            name = f"{rock.value.lower()}_{i:03d}.png"
            (out / name).write_bytes(encode_png(sample.image))
            section = f"{rock.value.lower()}-{i // images_per_section:02d}"
            entries.append(CorpusEntry(name, rock, section, s))
    if not entries:
        raise ValueError("class_counts requests no images")
    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["path", "rock", "section", "seed"])
        for e in entries:
            w.writerow([e.path, e.rock.value, e.section, e.seed])
    return manifest, entries
