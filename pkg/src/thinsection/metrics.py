"""Confusion counting and precision tables."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .grid import ParamSet


class UndefinedPrecision(ArithmeticError):
    """Raised when no positive predictions were made (tp + fp == 0)."""


class EmptyGroup(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise UndefinedPrecision("precision is undefined without positive predictions")
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedPrecision("recall is undefined without positive examples")
    return c.tp / (c.tp + c.fn)


def tally(predictions: Iterable[tuple], target) -> ConfusionCounts:
    """Count one-vs-rest outcomes for ``target`` over (predicted, true) pairs."""
    tp = fp = fn = tn = 0
    for pred, true in predictions:
        if pred == target:
            if true == target:
                tp += 1
            else:
                fp += 1
        elif true == target:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


@dataclass(frozen=True)
class PrecisionRecord:
    """Precision of one rock class under one parameter set.

    ``precision`` is None when the class was never predicted, so averages can
    skip it rather than count it as zero.
    """

    rock: str
    params: ParamSet
    counts: ConfusionCounts
    support: int

    @property
    def precision(self) -> float | None:
        try:
            return precision(self.counts)
        except UndefinedPrecision:
            return None

    def key(self, name: str):
        if name == "rock":
            return self.rock
        if name == "canny_high":
            return self.params.canny.t_high
        return getattr(self.params, name)


@dataclass(frozen=True)
class GroupAverage:
    mean: float | None
    n_defined: int
    n_undefined: int


def average_precision_by_class(
    records: Sequence[PrecisionRecord], keys: Sequence[str] = ("rock", "grid")
) -> dict[tuple, GroupAverage]:
    if not records:
        raise EmptyGroup("no precision records to average")
    groups: dict[tuple, list[PrecisionRecord]] = defaultdict(list)
    for rec in records:
        groups[tuple(rec.key(k) for k in keys)].append(rec)
    out = {}
    for key in sorted(groups):
        defined = [r.precision for r in groups[key] if r.precision is not None]
        mean = sum(defined) / len(defined) if defined else None
        out[key] = GroupAverage(mean, len(defined), len(groups[key]) - len(defined))
    return out


CSV_COLUMNS = ("rock", "grid", "t_canny_or_nonzero", "t_variance", "precision", "support")


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def precision_table_csv(records: Sequence[PrecisionRecord]) -> str:
    """Per-class precision table; the threshold column is the swept Canny value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.rock, r.params.grid, _fmt(r.params.canny.t_high), _fmt(r.params.t_variance),
            _fmt(r.precision), r.support,
        ])
    return buf.getvalue()


def precision_table_json(records: Sequence[PrecisionRecord]) -> list[dict]:
    return [
        {
            "rock": r.rock,
            "grid": r.params.grid,
            "t_nonzero": r.params.t_nonzero,
            "canny_high": r.params.canny.t_high,
            "t_variance": r.params.t_variance,
            "precision": None if r.precision is None else round(r.precision, 6),
            "tp": r.counts.tp,
            "fp": r.counts.fp,
            "fn": r.counts.fn,
            "tn": r.counts.tn,
            "support": r.support,
        }
        for r in records
    ]


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
