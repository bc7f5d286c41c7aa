"""Parameter sweeps over a labelled corpus and their CSV/JSON reports.

Two fixed plans are built in:

* experiment 1: 4x4 at Canny 0.01/0.02/0.03, 8x8/16x16/32x32 at 0.01 only,
  each crossed with colour-variance thresholds 50..300 step 50 (36 combos);
* experiment 2: the full cross of grids {4, 8, 16, 32}, Canny
  {0.01, 0.02, 0.03} and variance {100, 200, 300} (36 combos).

The swept "Canny" value drives the detector's high threshold. The cell-level
edge-fraction cutoff is fixed (0.01 by default) unless ``bind_thresholds``
ties it to the same swept value.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .colorstats import VarianceMode, cell_colour_variances
from .edge import CannyParams, hysteresis, suppressed_magnitude
from .grid import ParamSet, cell_edge_fractions, label_cells, make_grid
from .imgcore import ImageError, read_image, to_grayscale, to_working
from .metrics import (
    PrecisionRecord,
    average_precision_by_class,
    precision_table_json,
    tally,
)
from .petro import Rock, RockDecision, classify_rock

log = logging.getLogger(__name__)

CANNY_THRESHOLDS = (0.01, 0.02, 0.03)
EXP1_VARIANCE = (50, 100, 150, 200, 250, 300)
EXP2_VARIANCE = (100, 200, 300)
DEFAULT_CELL_CUTOFF = 0.01

REPORT_COLUMNS = (
    "image", "section", "grid", "t_nonzero", "t_variance", "canny_high",
    "quartz_pct", "accessory_pct", "predicted", "truth", "correct", "error",
)


class CorpusEmpty(ValueError):
    pass


class NoDefinedPrecision(ValueError):
    pass


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    """One manifest row; ``path`` is relative to the manifest's directory."""

    path: str
    rock: Rock
    section: str
    seed: int | None = None


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    combos: tuple[ParamSet, ...]
    corpus: tuple[CorpusEntry, ...] = ()
    root: str = "."

    def __post_init__(self):
        if not self.combos:
            raise PlanError("a plan needs at least one parameter combination")
        if len(set(self.combos)) != len(self.combos):
            raise PlanError("duplicate parameter combinations in plan")

    def with_corpus(self, corpus: Iterable[CorpusEntry], root: str | Path = ".") -> "ExperimentPlan":
        return ExperimentPlan(self.name, self.combos, tuple(corpus), str(root))


def make_combo(
    grid: int,
    swept: float,
    t_variance: float,
    bind_thresholds: bool = False,
    cell_cutoff: float = DEFAULT_CELL_CUTOFF,
    variance_mode: VarianceMode | str = VarianceMode.CHROMA,
    sigma: float = 1.4,
    low_ratio: float = 0.4,
) -> ParamSet:
    return ParamSet(
        grid=grid,
        t_nonzero=swept if bind_thresholds else cell_cutoff,
        t_variance=float(t_variance),
        canny=CannyParams(t_high=swept, sigma=sigma, low_ratio=low_ratio),
        variance_mode=VarianceMode.parse(variance_mode),
    )


def plan_experiment1(**combo_kwargs) -> ExperimentPlan:
    rows = [(4, CANNY_THRESHOLDS), (8, (0.01,)), (16, (0.01,)), (32, (0.01,))]
    combos = tuple(
        make_combo(g, t, v, **combo_kwargs)
        for g, ts in rows
        for t in ts
        for v in EXP1_VARIANCE
    )
    return ExperimentPlan("experiment1", combos)


def plan_experiment2(**combo_kwargs) -> ExperimentPlan:
    combos = tuple(
        make_combo(g, t, v, **combo_kwargs)
        for g, t, v in itertools.product((4, 8, 16, 32), CANNY_THRESHOLDS, EXP2_VARIANCE)
    )
    return ExperimentPlan("experiment2", combos)


def load_plan(path: str | Path, **combo_kwargs) -> ExperimentPlan:
    """Read a custom plan from JSON.

    Either an explicit list, ``{"combos": [{"grid", "canny_high",
    "t_variance", ["t_nonzero"]}, ...]}``, or a cross product,
    ``{"grids": [...], "canny": [...], "variance": [...]}``.
    """
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PlanError(f"{path}: {exc}") from exc
    name = spec.get("name", path.stem)
    if "combos" in spec:
        combos = []
        for c in spec["combos"]:
            kw = dict(combo_kwargs)
            if "t_nonzero" in c:
                kw["cell_cutoff"] = c["t_nonzero"]
                kw["bind_thresholds"] = False
            combos.append(make_combo(c["grid"], c["canny_high"], c["t_variance"], **kw))
    elif {"grids", "canny", "variance"} <= spec.keys():
        combos = [
            make_combo(g, t, v, **combo_kwargs)
            for g, t, v in itertools.product(spec["grids"], spec["canny"], spec["variance"])
        ]
    else:
        raise PlanError(f"{path}: expected 'combos' or 'grids'/'canny'/'variance'")
    return ExperimentPlan(name, tuple(combos))


def load_manifest(path: str | Path) -> list[CorpusEntry]:
    """Read a ``path,rock,section`` manifest; paths stay as written."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = {"path", "rock", "section"} - set(reader.fieldnames or ())
        if missing:
            raise CorpusEmpty(f"{path}: manifest lacks columns {sorted(missing)}")
        entries = []
        for row in reader:
            seed = row.get("seed")
            entries.append(CorpusEntry(
                row["path"], Rock.parse(row["rock"]), row["section"],
                int(seed) if seed else None,
            ))
    return entries


@dataclass(frozen=True)
class SweepRow:
    image: str
    section: str
    combo_index: int
    params: ParamSet
    truth: Rock
    quartz_pct: float | None = None
    accessory_pct: float | None = None
    decision: RockDecision | None = None
    error: str | None = None

    @property
    def predicted(self) -> str | None:
        return None if self.decision is None else self.decision.label

    @property
    def correct(self) -> bool:
        return self.decision is not None and self.decision.rock is self.truth


@dataclass
class SweepReport:
    plan_name: str
    combos: tuple[ParamSet, ...]
    rows: list[SweepRow] = field(default_factory=list)

    def precision_records(self) -> list[PrecisionRecord]:
        by_combo: dict[int, list[SweepRow]] = {i: [] for i in range(len(self.combos))}
        for row in self.rows:
            if row.error is None:
                by_combo[row.combo_index].append(row)
        records = []
        for i, params in enumerate(self.combos):
            pairs = [(r.predicted, r.truth.value) for r in by_combo[i]]
            for rock in Rock:
                records.append(PrecisionRecord(rock.value, params, tally(pairs, rock.value), len(pairs)))
        return records

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            p = r.params
            w.writerow([
                r.image, r.section, p.grid, _f6(p.t_nonzero), _f6(p.t_variance),
                _f6(p.canny.t_high), _f6(r.quartz_pct), _f6(r.accessory_pct),
                r.predicted or "", r.truth.value, "true" if r.correct else "false",
                r.error or "",
            ])
        return buf.getvalue()

    def summary(self) -> dict:
        records = self.precision_records()
        averages = {}
        for (rock, grid), avg in average_precision_by_class(records, ("rock", "grid")).items():
            averages.setdefault(rock, {})[str(grid)] = None if avg.mean is None else round(avg.mean, 6)
        best = {}
        for rock in Rock:
            try:
                params = best_params(self, rock, records)
            except NoDefinedPrecision:
                continue
            top = max(r.precision for r in records if r.rock == rock.value and r.precision is not None)
            best[rock.value] = {"precision": round(top, 6), "params": [_params_dict(p) for p in params]}
        return {
            "generated_by": f"thinsection {__version__}",
            "plan": self.plan_name,
            "images": len({r.image for r in self.rows}),
            "combos": len(self.combos),
            "rows": len(self.rows),
            "errors": sum(1 for r in self.rows if r.error is not None),
            "precision": precision_table_json(records),
            "average_precision_by_grid": averages,
            "best_params": best,
        }

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = out / "report.csv"
        summary = out / "summary.json"
        report.write_bytes(self.to_csv().encode("utf-8"))
        summary.write_bytes((json.dumps(self.summary(), indent=2) + "\n").encode("utf-8"))
        return report, summary


def _f6(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def _params_dict(p: ParamSet) -> dict:
    return {
        "grid": p.grid,
        "t_nonzero": p.t_nonzero,
        "t_variance": p.t_variance,
        "canny_high": p.canny.t_high,
    }


def _evaluate_image(task) -> list[SweepRow]:
    """All combos for one image, sharing decode, blur/NMS and cell scores."""
    entry, root, combos = task
    base = dict(image=entry.path, section=entry.section, truth=entry.rock)
    try:
        rgb, _ = read_image(Path(root) / entry.path)
    except (OSError, ImageError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [SweepRow(combo_index=i, params=p, error=msg, **base) for i, p in enumerate(combos)]
    rgb = to_working(rgb)
    gray = to_grayscale(rgb)

    suppressed, edges, variances, fractions = {}, {}, {}, {}
    rows = []
    for i, p in enumerate(combos):
        try:
            c = p.canny
            if c.sigma not in suppressed:
                suppressed[c.sigma] = suppressed_magnitude(gray, c.sigma)
            if c not in edges:
                edges[c] = hysteresis(suppressed[c.sigma], c.t_high, c.low_ratio)
            spec = make_grid(rgb.width, rgb.height, p.grid)
            vkey = (p.grid, p.variance_mode)
            if vkey not in variances:
                variances[vkey] = cell_colour_variances(rgb, spec.row_starts, spec.col_starts, p.variance_mode)
            fkey = (p.grid, c)
            if fkey not in fractions:
                fractions[fkey] = cell_edge_fractions(edges[c], spec)
            _, pct = label_cells(fractions[fkey], variances[vkey], p)
            decision = classify_rock(pct.quartz_pct, pct.accessory_pct)
            rows.append(SweepRow(
                combo_index=i, params=p, quartz_pct=pct.quartz_pct,
                accessory_pct=pct.accessory_pct, decision=decision, **base,
            ))
        except ValueError as exc:
            rows.append(SweepRow(combo_index=i, params=p, error=f"{type(exc).__name__}: {exc}", **base))
    return rows


def run_sweep(plan: ExperimentPlan, workers: int = 1) -> SweepReport:
    if not plan.corpus:
        raise CorpusEmpty("the plan has no corpus images")
    tasks = [(entry, plan.root, plan.combos) for entry in plan.corpus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_image = list(pool.map(_evaluate_image, tasks))
    else:
        per_image = [_evaluate_image(t) for t in tasks]
    rows = sorted(itertools.chain.from_iterable(per_image), key=lambda r: (r.image, r.combo_index))
    n_err = sum(1 for r in rows if r.error)
    if n_err:
        log.warning("%d of %d sweep rows failed", n_err, len(rows))
    return SweepReport(plan.name, plan.combos, rows)


def best_params(
    report: SweepReport, rock: Rock | str, records: Sequence[PrecisionRecord] | None = None
) -> list[ParamSet]:
    """Every combo reaching the top defined precision for ``rock``."""
    if not report.rows:
        raise CorpusEmpty("empty report")
    rock = Rock.parse(rock)
    if records is None:
        records = report.precision_records()
    scored = [(r.precision, r.params) for r in records if r.rock == rock.value and r.precision is not None]
    if not scored:
        raise NoDefinedPrecision(f"{rock.value} was never predicted")
    top = max(s for s, _ in scored)
    return sorted({p for s, p in scored if s == top}, key=lambda p: p.sort_key)
