"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (with its runtime) that is echoed
immediately and repeated in the pytest terminal summary.
"""

import time
from contextlib import contextmanager

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import ACCEPTANCE_LINES
from thinsection.cli import main
from thinsection.colorstats import VarianceMode, cell_colour_variances, colour_variance, stats
from thinsection.edge import CannyParams, canny, hysteresis, suppressed_magnitude
from thinsection.grid import ParamSet, cell_edge_fractions, label_cells, make_grid
from thinsection.imgcore import GrayImage, RgbImage, encode_png, to_grayscale
from thinsection.metrics import ConfusionCounts, UndefinedPrecision, precision, tally
from thinsection.petro import QAPF_TABLE, Rock, classify_rock
from thinsection.sweep import (
    best_params,
    load_manifest,
    plan_experiment1,
    plan_experiment2,
    run_sweep,
)
from thinsection.synth import diorite_trace_sample, generate_corpus, sample_for_rock

from test_cli import GOLDEN, TRACE_ARGS


@contextmanager
def criterion(number, title, budget_s):
    start = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
        status = "PASS"
    except AssertionError as exc:
        detail = f" ({str(exc).splitlines()[0] if str(exc) else 'assertion failed'})"
        raise
    finally:
        elapsed = time.perf_counter() - start
        line = f"AC{number} {status} {title} [{elapsed:.2f}s / {budget_s}s]{detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_ac1_grid_geometry():
    with criterion(1, "grid geometry", 1):
        g8 = make_grid(512, 384, 8)
        g16 = make_grid(512, 384, 16)
        assert g8.total_cells == 64 and {(r.width, r.height) for r in g8.cells()} == {(64, 48)}
        assert g16.total_cells == 256 and {(r.width, r.height) for r in g16.cells()} == {(32, 24)}


def test_ac2_trace_golden(tmp_path, monkeypatch, capsys):
    with criterion(2, "single-image trace golden", 5):
        monkeypatch.chdir(tmp_path)
        sample = diorite_trace_sample()
        assert (sample.quartz_cells, sample.accessory_cells) == (0, 17)
        (tmp_path / "diorite_8x8.png").write_bytes(encode_png(sample.image))
        capsys.readouterr()
        assert main(["classify", "diorite_8x8.png", *TRACE_ARGS]) == 0
        out = capsys.readouterr().out
        assert "Accessory Minerals\t17/64" in out and "Quartz\t0/64" in out
        assert out.endswith("It's a Diorite!\n")
        assert out == GOLDEN.read_text()


def test_ac3_canny_oracle():
    with criterion(3, "Canny equals naive reference on 100 images", 30):
        rng = np.random.default_rng(2024)
        thresholds = (0.01, 0.02, 0.03, 0.1, 0.3)
        mismatches = 0
        for i in range(100):
            img = rng.integers(0, 256, (32, 32), dtype=np.uint8)
            t = thresholds[i % len(thresholds)]
            got = canny(GrayImage(img), CannyParams(t_high=t)).mask
            want = oracles.naive_canny(img, t)
            mismatches += int(not np.array_equal(got, want))
        assert mismatches == 0, f"{mismatches} of 100 edge maps differ"


def _rel_ok(got, want, rel=1e-9):
    return abs(got - want) <= rel * max(abs(want), 1e-12)


def test_ac4_statistics_oracle():
    with criterion(4, "statistics oracle", 10):
        rng = np.random.default_rng(99)
        bad = 0
        for _ in range(1000):
            h, w = rng.integers(1, 13, size=2)
            cell = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            img = RgbImage(cell)
            s = stats(cell[..., 0])
            mean, ssd = oracles.exact_stats(cell[..., 0].ravel())
            per = oracles.naive_channel_variances(cell)
            checks = [
                (s.mean, mean), (s.sum_sq_dev, ssd),
                (colour_variance(img, mode=VarianceMode.CHROMA).value, oracles.naive_chroma(cell)),
                (colour_variance(img, mode=VarianceMode.PER_CHANNEL_MAX).value, max(per)),
                (colour_variance(img, mode=VarianceMode.PER_CHANNEL_MEAN).value, sum(per) / 3),
            ]
            bad += sum(not _rel_ok(g, w_) for g, w_ in checks)
        assert bad == 0, f"{bad} statistics disagree with the oracle"
        red = RgbImage(np.tile(np.array([255, 0, 0], dtype=np.uint8), (8, 8, 1)))
        assert colour_variance(red).value == 14450


def test_ac5_monotonicity():
    with criterion(5, "threshold monotonicity on 50 images", 60):
        rocks = list(Rock)
        t_nonzero = (0.0, 0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.5, 1.0)
        t_variance = (0, 10, 50, 100, 150, 200, 250, 300, 1000, 20000)
        t_high = (0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.3, 1.0)
        violations = 0
        for i in range(50):
            s = sample_for_rock(rocks[i % 4], (8, 16, 32)[i % 3], seed=1000 + i)
            gray = to_grayscale(s.image)
            sup = suppressed_magnitude(gray)
            counts = [hysteresis(sup, t).count for t in t_high]
            violations += sum(b > a for a, b in zip(counts, counts[1:]))
            spec = make_grid(512, 384, 16)
            ef = cell_edge_fractions(hysteresis(sup, 0.02), spec)
            cv = cell_colour_variances(s.image, spec.row_starts, spec.col_starts)
            q = [label_cells(ef, cv, ParamSet(t_nonzero=t))[1].quartz_fraction for t in t_nonzero]
            a = [label_cells(ef, cv, ParamSet(t_variance=v))[1].accessory_fraction for v in t_variance]
            violations += sum(y < x for x, y in zip(q, q[1:]))
            violations += sum(y > x for x, y in zip(a, a[1:]))
        assert violations == 0, f"{violations} monotonicity violations"


def _brute_matches(q, a):
    out = []
    for row in QAPF_TABLE:
        q_hi_ok = q < row.quartz.hi if row.quartz.hi_open else q <= row.quartz.hi
        if row.quartz.lo <= q and q_hi_ok and row.accessory.lo <= a <= row.accessory.hi:
            out.append(row.rock)
    return out


def test_ac6_qapf_lattice():
    with criterion(6, "QAPF decision table on a 0.5% lattice", 10):
        wrong = 0
        lattice = [i / 2 for i in range(201)]
        for q in lattice:
            for a in lattice:
                d = classify_rock(q, a)
                m = _brute_matches(q, a)
                if m:
                    wrong += d.rock not in m or list(d.matched) != m
                else:
                    wrong += d.rock is not None or d.label != "Unclassified"
        assert wrong == 0, f"{wrong} lattice points misclassified"
        assert Rock.DIORITE not in classify_rock(5, 30).matched
        assert classify_rock(4.5, 30).rock is Rock.DIORITE


def test_ac7_synthetic_precision(tmp_path):
    with criterion(7, "synthetic corpus precision >= 0.90 per class", 120):
        manifest, entries = generate_corpus({rock: 10 for rock in Rock}, seed=7, out_dir=tmp_path)
        assert len(entries) == 40
        plan = plan_experiment2().with_corpus(load_manifest(manifest), tmp_path)
        report = run_sweep(plan)
        records = report.precision_records()
        top = {}
        for rock in Rock:
            best_params(report, rock, records)
            top[rock.value] = max(
                r.precision for r in records if r.rock == rock.value and r.precision is not None
            )
        assert all(p >= 0.90 for p in top.values()), top


def test_ac8_sweep_determinism(corpus40, tmp_path):
    with criterion(8, "sweep cardinality and byte-identical reruns", 120):
        e1, e2 = plan_experiment1(), plan_experiment2()
        assert len(e1.combos) == 36 and len(e2.combos) == 36
        t1 = {(p.grid, p.canny.t_high) for p in e1.combos}
        assert t1 == {(4, 0.01), (4, 0.02), (4, 0.03), (8, 0.01), (16, 0.01), (32, 0.01)}
        t2 = {(p.grid, p.canny.t_high, p.t_variance) for p in e2.combos}
        assert len(t2) == 36 and {v for *_, v in t2} == {100, 200, 300}
        manifest, _ = corpus40
        plan = e2.with_corpus(load_manifest(manifest), manifest.parent)
        a, _ = run_sweep(plan).write(tmp_path / "a")
        b, _ = run_sweep(plan, workers=2).write(tmp_path / "b")
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 1 + 40 * 36


counts = st.builds(ConfusionCounts, *(st.integers(0, 30) for _ in range(4)))
pairs = st.lists(st.tuples(st.sampled_from(list(Rock) + [None]), st.sampled_from(list(Rock))), max_size=30)


@settings(max_examples=200, deadline=None)
@given(counts)
def _precision_properties(c):
    if c.tp + c.fp == 0:
        try:
            precision(c)
        except UndefinedPrecision:
            return
        raise AssertionError("expected UndefinedPrecision")
    p = precision(c)
    assert 0 <= p <= 1
    assert precision(c + ConfusionCounts(tp=1)) >= p
    assert precision(c + ConfusionCounts(fp=1)) <= p


@settings(max_examples=200, deadline=None)
@given(pairs, pairs, st.sampled_from(list(Rock)))
def _tally_additive(a, b, target):
    assert tally(a + b, target) == tally(a, target) + tally(b, target)


def test_ac9_precision_algebra():
    with criterion(9, "precision algebra properties", 5):
        _precision_properties()
        _tally_additive()
