"""QAPF range lookup for intrusive igneous rocks and per-section voting."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass


class PercentOutOfRange(ValueError):
    pass


class EmptyVotes(ValueError):
    pass


class Rock(str, enum.Enum):
    GRANITE = "Granite"
    ADAMELLITE = "Adamellite"
    TONALITE = "Tonalite"
    DIORITE = "Diorite"

    @classmethod
    def parse(cls, value: "str | Rock") -> "Rock":
        if isinstance(value, cls):
            return value
        for rock in cls:
            if rock.value.lower() == str(value).strip().lower():
                return rock
        raise ValueError(f"unknown rock type {value!r}")


UNCLASSIFIED = "Unclassified"
INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    hi_open: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x: float) -> bool:
        if self.hi_open:
            return self.lo <= x < self.hi
        return self.lo <= x <= self.hi

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class RockRange:
    rock: Rock
    quartz: Interval
    accessory: Interval
    alkali_feldspar: Interval | None
    plagioclase: Interval

    def contains(self, q_pct: float, a_pct: float) -> bool:
        return q_pct in self.quartz and a_pct in self.accessory

    def center_distance(self, q_pct: float, a_pct: float) -> float:
        dq = (q_pct - self.quartz.center) / self.quartz.width
        da = (a_pct - self.accessory.center) / self.accessory.width
        return math.hypot(dq, da)


# Modal percentages per rock, in table order (used for tie-breaks).
# Feldspar columns are carried along but never matched.
QAPF_TABLE: tuple[RockRange, ...] = (
    RockRange(Rock.GRANITE, Interval(20, 60), Interval(5, 20), Interval(35, 90), Interval(10, 65)),
    RockRange(Rock.ADAMELLITE, Interval(5, 20), Interval(10, 35), Interval(35, 65), Interval(35, 65)),
    RockRange(Rock.TONALITE, Interval(15, 50), Interval(10, 40), Interval(10, 35), Interval(65, 90)),
    RockRange(Rock.DIORITE, Interval(0, 5, hi_open=True), Interval(20, 50), None, Interval(70, 90)),
)


@dataclass(frozen=True)
class RockDecision:
    rock: Rock | None
    matched: tuple[Rock, ...]
    nearest: Rock
    distance: float
    q_pct: float
    a_pct: float

    @property
    def label(self) -> str:
        return self.rock.value if self.rock is not None else UNCLASSIFIED

    @property
    def verdict(self) -> str:
        if self.rock is None:
            return f"{UNCLASSIFIED} (nearest: {self.nearest.value})"
        return f"It's a {self.rock.value}!"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "matched": [r.value for r in self.matched],
            "nearest": self.nearest.value,
            "distance": round(self.distance, 6),
            "quartz_pct": round(self.q_pct, 6),
            "accessory_pct": round(self.a_pct, 6),
        }


def matching_rows(q_pct: float, a_pct: float, table=QAPF_TABLE) -> list[RockRange]:
    return [row for row in table if row.contains(q_pct, a_pct)]


def classify_rock(q_pct: float, a_pct: float, table=QAPF_TABLE) -> RockDecision:
    """Pick the rock whose quartz/accessory ranges contain the point.

    Ranges overlap, so among the matching rows the one whose range centre is
    closest (each axis scaled by that row's range width) wins, with table
    order breaking exact ties. With no match the result is unclassified and
    ``nearest`` reports the closest row by the same distance.
    """
    for name, v in (("quartz", q_pct), ("accessory", a_pct)):
        if not 0 <= v <= 100:
            raise PercentOutOfRange(f"{name} percentage {v} outside [0, 100]")
    matched = matching_rows(q_pct, a_pct, table)
    pool = matched or list(table)
    # min() keeps the first of equal keys, i.e. table order
    best = min(pool, key=lambda row: row.center_distance(q_pct, a_pct))
    return RockDecision(
        rock=best.rock if matched else None,
        matched=tuple(row.rock for row in matched),
        nearest=best.rock,
        distance=best.center_distance(q_pct, a_pct),
        q_pct=q_pct,
        a_pct=a_pct,
    )


@dataclass(frozen=True)
class SectionDecision:
    section_id: str
    votes: tuple[RockDecision, ...]
    rock: Rock | None

    @property
    def label(self) -> str:
        return self.rock.value if self.rock is not None else INDETERMINATE


def aggregate_section(votes, section_id: str = "") -> SectionDecision:
    """Strict-majority vote over classified images; unclassified votes abstain."""
    votes = tuple(votes)
    if not votes:
        raise EmptyVotes("no votes to aggregate")
    tally = Counter(v.rock for v in votes if v.rock is not None)
    cast = sum(tally.values())
    winner = None
    if tally:
        rock, n = tally.most_common(1)[0]
        if 2 * n > cast:
            winner = rock
    return SectionDecision(section_id, votes, winner)
