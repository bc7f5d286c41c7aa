import csv

import numpy as np
import pytest

from thinsection.colorstats import cell_colour_variances
from thinsection.edge import CannyParams
from thinsection.grid import CellLabel, ParamSet, classify_image, make_grid
from thinsection.imgcore import Rect, decode, read_image
from thinsection.petro import Rock
from thinsection.synth import (
    ROCK_WINDOWS,
    AmbiguousTruth,
    RegionKind,
    RegionSpec,
    child_seed,
    generate,
    generate_corpus,
    sample_for_rock,
    diorite_trace_sample,
    truth_rock_for,
)


def test_diorite_trace_sample_profile():
    s = diorite_trace_sample()
    assert (s.grid, s.quartz_cells, s.accessory_cells) == (8, 0, 17)
    assert s.truth_rock is Rock.DIORITE
    assert (s.image.width, s.image.height) == (512, 384)


def test_all_quartz_is_ambiguous():
    with pytest.raises(AmbiguousTruth):
        generate([RegionSpec(RegionKind.QUARTZ_LIKE, Rect(0, 0, 4, 4))], 4, seed=1)


def test_overlapping_truth_rejected():
    # 18.75% quartz, 18.75% accessory sits in both Adamellite and Tonalite
    with pytest.raises(AmbiguousTruth):
        truth_rock_for(12, 12, 64)


def test_regions_must_tile():
    with pytest.raises(ValueError):
        generate([RegionSpec(RegionKind.FELDSPAR_LIKE, Rect(0, 0, 2, 4))], 4, seed=1)


def test_generation_is_deterministic():
    a = sample_for_rock(Rock.GRANITE, 16, seed=42)
    b = sample_for_rock(Rock.GRANITE, 16, seed=42)
    c = sample_for_rock(Rock.GRANITE, 16, seed=43)
    assert a.image == b.image
    assert not c.image == a.image


@pytest.mark.parametrize("rock", list(Rock))
def test_declared_fractions_inside_window(rock):
    for seed in range(5):
        s = sample_for_rock(rock, 16, seed)
        (qlo, qhi), (alo, ahi) = ROCK_WINDOWS[rock]
        assert qlo <= 100 * s.quartz_cells / 256 <= qhi
        assert alo <= 100 * s.accessory_cells / 256 <= ahi
        assert s.truth_rock is rock


def test_region_textures_stay_on_their_side_of_thresholds():
    for seed in range(4):
        s = sample_for_rock(Rock.TONALITE, 16, seed)
        spec = make_grid(512, 384, 16)
        cv = cell_colour_variances(s.image, spec.row_starts, spec.col_starts)
        quartz = cv[s.truth_cells == CellLabel.QUARTZ.value]
        accessory = cv[s.truth_cells == CellLabel.ACCESSORY.value]
        feldspar = cv[s.truth_cells == CellLabel.OTHER.value]
        assert quartz.max() < 5
        assert feldspar.max() < 50
        assert accessory.min() > 300


def test_reference_params_recover_truth():
    for rock in Rock:
        for seed in range(3):
            s = sample_for_rock(rock, 16, seed)
            p = ParamSet(grid=16, t_nonzero=0.01, t_variance=100, canny=CannyParams(t_high=0.01))
            cells, _ = classify_image(s.image, None, p)
            assert (cells.labels == s.truth_cells).mean() >= 0.95


def test_region_spec_dict_roundtrip():
    r = RegionSpec(RegionKind.ACCESSORY_LIKE, Rect(1, 2, 3, 1), (10, 20, 30), 4)
    assert RegionSpec.from_dict(r.to_dict()) == r


def test_child_seeds_differ():
    assert len({child_seed(7, i) for i in range(100)}) == 100


def test_generate_corpus(tmp_path):
    manifest, entries = generate_corpus({"Granite": 2, Rock.DIORITE: 1}, seed=3, out_dir=tmp_path)
    rows = list(csv.DictReader(manifest.open()))
    assert len(rows) == len(entries) == 3
    assert [r["rock"] for r in rows] == ["Granite", "Granite", "Diorite"]
    for r in rows:
        img, meta = read_image(tmp_path / r["path"])
        assert (img.width, img.height) == (512, 384)
        s = sample_for_rock(Rock.parse(r["rock"]), 16 if r["rock"] == "Granite" else 8, int(r["seed"]))
        assert s.image == decode((tmp_path / r["path"]).read_bytes())
    with pytest.raises(ValueError):
        generate_corpus({}, seed=3, out_dir=tmp_path)


def test_corpus_fixture_cardinality(corpus40):
    _, entries = corpus40
    assert len(entries) == 40
    assert {rock: sum(e.rock is rock for e in entries) for rock in Rock} == {rock: 10 for rock in Rock}
    assert np.all([e.seed is not None for e in entries])
