import pytest
from hypothesis import given
from hypothesis import strategies as st

from thinsection.petro import (
    INDETERMINATE,
    QAPF_TABLE,
    UNCLASSIFIED,
    EmptyVotes,
    PercentOutOfRange,
    Rock,
    aggregate_section,
    classify_rock,
    matching_rows,
)

pct = st.floats(0, 100, allow_nan=False)


def test_table_rows():
    got = {r.rock: (r.quartz.lo, r.quartz.hi, r.accessory.lo, r.accessory.hi) for r in QAPF_TABLE}
    assert got == {
        Rock.GRANITE: (20, 60, 5, 20),
        Rock.ADAMELLITE: (5, 20, 10, 35),
        Rock.TONALITE: (15, 50, 10, 40),
        Rock.DIORITE: (0, 5, 20, 50),
    }
    assert [r.rock for r in QAPF_TABLE] == list(Rock)


def test_trace_point_is_diorite():
    d = classify_rock(0.0, 100 * 17 / 64)
    assert d.rock is Rock.DIORITE and d.matched == (Rock.DIORITE,)
    assert d.verdict == "It's a Diorite!"


def test_overlap_resolved_by_normalized_distance():
    d = classify_rock(40, 10)
    assert set(d.matched) == {Rock.GRANITE, Rock.TONALITE}
    # Granite: ((40-40)/40, (10-12.5)/15) vs Tonalite: ((40-32.5)/35, (10-25)/30)
    assert d.rock is Rock.GRANITE
    assert d.distance == pytest.approx(2.5 / 15)


def test_no_match_is_unclassified():
    d = classify_rock(70, 60)
    assert d.rock is None and d.matched == () and d.label == UNCLASSIFIED
    assert d.verdict.startswith("Unclassified (nearest: ")


def test_diorite_boundary_half_open():
    assert Rock.DIORITE not in classify_rock(5, 30).matched
    assert classify_rock(4.99, 30).rock is Rock.DIORITE


def test_out_of_range():
    for q, a in ((-1, 0), (0, 100.5)):
        with pytest.raises(PercentOutOfRange):
            classify_rock(q, a)


@given(pct, pct)
def test_label_in_match_set(q, a):
    d = classify_rock(q, a)
    brute = tuple(r.rock for r in QAPF_TABLE if r.quartz.lo <= q and a >= r.accessory.lo
                  and a <= r.accessory.hi
                  and (q < r.quartz.hi if r.quartz.hi_open else q <= r.quartz.hi))
    assert d.matched == brute
    assert (d.rock is None) == (not brute)
    if len(brute) == 1:
        assert d.rock is brute[0]


@given(pct, pct, st.floats(0.1, 10))
def test_common_rescaling_keeps_winner(q, a, k):
    rows = matching_rows(q, a) or list(QAPF_TABLE)
    best = min(rows, key=lambda r: r.center_distance(q, a))
    scaled = min(rows, key=lambda r: k * r.center_distance(q, a))
    assert best.rock is scaled.rock


def _vote(rock):
    if rock is None:
        return classify_rock(70, 60)
    row = next(r for r in QAPF_TABLE if r.rock is rock)
    return classify_rock(row.quartz.center, row.accessory.center)


def test_majority_votes():
    D, G, T = Rock.DIORITE, Rock.GRANITE, Rock.TONALITE
    assert aggregate_section([_vote(D), _vote(D), _vote(G)]).rock is D
    assert aggregate_section([_vote(G), _vote(D), _vote(T)]).label == INDETERMINATE
    assert aggregate_section([_vote(None), _vote(D), _vote(D)], "s1").rock is D
    assert aggregate_section([_vote(None)]).label == INDETERMINATE
    assert aggregate_section([_vote(G), _vote(D)]).label == INDETERMINATE


def test_empty_votes():
    with pytest.raises(EmptyVotes):
        aggregate_section([])


def test_rock_parse():
    assert Rock.parse(" granite ") is Rock.GRANITE
    with pytest.raises(ValueError):
        Rock.parse("basalt")
