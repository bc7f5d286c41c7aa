"""Command-line entry point.

    thinsection classify IMAGE [--grid 8 --t-nonzero 0.01 --t-variance 50 ...]
    thinsection sweep --plan experiment2 --manifest corpus/manifest.csv --out results/
    thinsection synth --out corpus/ --per-class 10 --seed 7
    thinsection report results/report.csv

Exit codes: 0 success, 1 usage, 2 I/O, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .colorstats import VarianceMode, histogram
from .edge import CannyParams, canny
from .grid import ParamSet, classify_image, make_grid
from .imgcore import WORKING_SIZE, ImageError, encode_png, read_image, to_grayscale, to_working
from .metrics import ConfusionCounts, PrecisionRecord, average_precision_by_class, tally
from .petro import Rock, classify_rock
from .render import render_overlay
from .sweep import (
    DEFAULT_CELL_CUTOFF,
    CorpusEmpty,
    ExperimentPlan,
    NoDefinedPrecision,
    PlanError,
    best_params,
    load_manifest,
    load_plan,
    plan_experiment1,
    plan_experiment2,
    run_sweep,
)
from .synth import diorite_trace_sample, generate_corpus

log = logging.getLogger("thinsection")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3

VARIANCE_CHOICES = ("chroma", "per-channel-max", "per-channel-mean")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(v: float) -> str:
    return f"{v:g}"


def format_trace(path: str, rgb_size: tuple[int, int], params: ParamSet, pct, decision) -> str:
    """Text trace of one classification: grid, cell counts, thresholds and verdict."""
    w, h = rgb_size
    spec = make_grid(w, h, params.grid)
    n = pct.total_cells
    lines = [
        f"Opening {path}",
        f"Params\t= {params.grid}x{params.grid}",
        f"Image resolution\t{w} x {h}",
        f"Cell resolution\t{spec.cell_width}x{spec.cell_height}",
        f"Number of cells\t{n}",
        f"t nonzero\t{_num(params.t_nonzero)}",
        f"Accessory Minerals\t{pct.accessory_cells}/{n} ({pct.accessory_fraction:.6f})",
        f"t variance\t{_num(params.t_variance)}",
        f"Quartz\t{pct.quartz_cells}/{n} ({pct.quartz_fraction:.6f})",
        decision.verdict,
    ]
    return "\n".join(lines) + "\n"


def _params_from_args(args) -> ParamSet:
    canny_high = args.canny_high
    if args.bind_thresholds or canny_high is None:
        canny_high = args.t_nonzero
    return ParamSet(
        grid=args.grid,
        t_nonzero=args.t_nonzero,
        t_variance=args.t_variance,
        canny=CannyParams(t_high=canny_high, sigma=args.sigma, low_ratio=args.low_ratio),
        variance_mode=VarianceMode.parse(args.variance_mode),
    )


def cmd_classify(args) -> int:
    try:
        params = _params_from_args(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rgb, meta = read_image(args.image)
    rgb = to_working(rgb)
    if (rgb.width, rgb.height) != WORKING_SIZE:
        log.warning("working image is %dx%d, not %dx%d", rgb.width, rgb.height, *WORKING_SIZE)
    gray = to_grayscale(rgb)
    edges = canny(gray, params.canny)
    cells, pct = classify_image(rgb, gray, params, edges=edges)
    decision = classify_rock(pct.quartz_pct, pct.accessory_pct)

    if args.dump_edges:
        Path(args.dump_edges).write_bytes(encode_png(edges.mask))
    if args.dump_overlay:
        Path(args.dump_overlay).write_bytes(render_overlay(rgb, cells))
    if args.dump_cells:
        Path(args.dump_cells).write_text(cells.to_json() + "\n", encoding="utf-8")
    if args.dump_histograms:
        spec = make_grid(rgb.width, rgb.height, params.grid)
        hists = [histogram(rgb, rect).bins.tolist() for rect in spec.cells()]
        Path(args.dump_histograms).write_text(
            json.dumps({"cells_x": spec.cells_x, "cells_y": spec.cells_y, "histograms": hists}) + "\n",
            encoding="utf-8",
        )
    if args.json:
        out = {"image": meta.source_path, "params": {
            "grid": params.grid, "t_nonzero": params.t_nonzero,
            "t_variance": params.t_variance, "canny_high": params.canny.t_high,
            "variance_mode": params.variance_mode.value,
        }, "cells": cells.to_dict(), "decision": decision.to_dict()}
        sys.stdout.write(json.dumps(out, indent=2) + "\n")
    else:
        sys.stdout.write(format_trace(args.image, (rgb.width, rgb.height), params, pct, decision))
    return EXIT_OK


def _plan_from_args(args) -> ExperimentPlan:
    kw = dict(
        bind_thresholds=args.bind_thresholds,
        cell_cutoff=args.t_nonzero,
        variance_mode=args.variance_mode,
        sigma=args.sigma,
        low_ratio=args.low_ratio,
    )
    if args.plan == "experiment1":
        return plan_experiment1(**kw)
    if args.plan == "experiment2":
        return plan_experiment2(**kw)
    if not Path(args.plan).exists():
        raise UsageError(f"--plan must be experiment1, experiment2 or a JSON file, got {args.plan!r}")
    return load_plan(args.plan, **kw)


def cmd_sweep(args) -> int:
    try:
        plan = _plan_from_args(args)
    except (PlanError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    manifest = Path(args.manifest)
    entries = load_manifest(manifest)
    if not entries:
        raise CorpusEmpty(f"{manifest} lists no images")
    plan = plan.with_corpus(entries, root=manifest.parent)
    report = run_sweep(plan, workers=args.workers)
    report_path, summary_path = report.write(args.out)
    if all(r.error for r in report.rows):
        log.error("every sweep row failed; see %s", report_path)
        return EXIT_DATA

    out = sys.stdout
    out.write(f"{plan.name}: {len(entries)} images x {len(plan.combos)} combos -> {report_path}\n")
    records = report.precision_records()
    for rock in Rock:
        if not any(e.rock is rock for e in entries):
            continue
        try:
            best = best_params(report, rock, records)
        except NoDefinedPrecision:
            out.write(f"{rock.value}: never predicted\n")
            continue
        top = max(r.precision for r in records if r.rock == rock.value and r.precision is not None)
        combos = ", ".join(
            f"{p.grid}x{p.grid}/canny {_num(p.canny.t_high)}/var {_num(p.t_variance)}" for p in best
        )
        out.write(f"{rock.value}: best precision {top:.6f} at {combos}\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.trace_sample:
        out.mkdir(parents=True, exist_ok=True)
        sample = diorite_trace_sample(args.seed)
        path = out / "diorite_8x8.png"
        path.write_bytes(encode_png(sample.image))
        sys.stdout.write(f"{path}\n")
        return EXIT_OK
    counts = {rock: args.per_class for rock in Rock}
    manifest, entries = generate_corpus(counts, args.seed, out)
    sys.stdout.write(f"{len(entries)} images -> {manifest}\n")
    return EXIT_OK


def _records_from_report_csv(path: Path) -> list[PrecisionRecord]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.DictReader(f) if not r["error"]]
    combos: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (int(r["grid"]), float(r["t_nonzero"]), float(r["t_variance"]), float(r["canny_high"]))
        combos.setdefault(key, []).append(r)
    records = []
    for (g, tn, tv, ch), group in combos.items():
        params = ParamSet(g, tn, tv, CannyParams(t_high=ch))
        pairs = [(r["predicted"], r["truth"]) for r in group]
        for rock in Rock:
            records.append(PrecisionRecord(rock.value, params, tally(pairs, rock.value), len(pairs)))
    return records


def cmd_report(args) -> int:
    records = _records_from_report_csv(Path(args.report))
    if not records:
        raise CorpusEmpty(f"{args.report} has no successful rows")
    keys = ("rock",) + tuple(args.by)
    table = average_precision_by_class(records, keys)
    out = sys.stdout
    out.write(",".join(keys + ("mean_precision", "defined", "undefined")) + "\n")
    for key, avg in table.items():
        mean = "" if avg.mean is None else f"{avg.mean:.6f}"
        out.write(",".join(str(k) for k in key) + f",{mean},{avg.n_defined},{avg.n_undefined}\n")
    return EXIT_OK


def _add_param_flags(p: argparse.ArgumentParser, t_nonzero_default: float, t_nonzero_help: str):
    p.add_argument("--grid", type=int, default=16, help="cells per side (default 16)")
    p.add_argument("--t-nonzero", type=float, default=t_nonzero_default, help=t_nonzero_help)
    p.add_argument("--t-variance", type=float, default=200.0,
                   help="colour-variance score above which a cell is accessory (default 200)")
    p.add_argument("--canny-high", type=float, default=None,
                   help="Canny high threshold as a fraction of the peak magnitude (default: --t-nonzero)")
    p.add_argument("--bind-thresholds", action="store_true",
                   help="use one value for the Canny threshold and the cell edge-fraction cutoff")
    p.add_argument("--variance-mode", choices=VARIANCE_CHOICES, default="chroma")
    p.add_argument("--sigma", type=float, default=1.4, help="Gaussian blur sigma in pixels")
    p.add_argument("--low-ratio", type=float, default=0.4, help="Canny low/high threshold ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thinsection", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"thinsection {__version__}")
    parser.add_argument("--config", help="JSON file of flag defaults (flags still win)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="classify one image and print a trace")
    p.add_argument("image")
    _add_param_flags(p, 0.02, "max edge-pixel fraction of a quartz cell (default 0.02)")
    p.add_argument("--dump-edges", metavar="PNG", help="write the Canny edge map as a 1-bit PNG")
    p.add_argument("--dump-overlay", metavar="PNG", help="write the labelled grid overlay")
    p.add_argument("--dump-cells", metavar="JSON", help="write per-cell labels and scores")
    p.add_argument("--dump-histograms", metavar="JSON", help="write per-cell RGB histograms")
    p.add_argument("--json", action="store_true", help="print JSON instead of the text trace")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="run a parameter sweep over a manifest")
    p.add_argument("--plan", default="experiment2", help="experiment1, experiment2 or a JSON plan file")
    p.add_argument("--manifest", required=True, help="CSV with header path,rock,section")
    p.add_argument("--out", default="results", help="output directory for report.csv/summary.json")
    p.add_argument("--workers", type=int, default=1)
    _add_param_flags(p, DEFAULT_CELL_CUTOFF,
                     "cell edge-fraction cutoff when thresholds are not bound (default 0.01)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--trace-sample", action="store_true",
                   help="write only the 8x8 Diorite sample (17 accessory cells, no quartz)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="average precision from an existing report.csv")
    p.add_argument("report")
    p.add_argument("--by", nargs="*", default=["grid"],
                   choices=["grid", "t_nonzero", "t_variance", "canny_high"])
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for sp in _subparsers(parser):
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})


def _subparsers(parser: argparse.ArgumentParser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            yield from action.choices.values()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        print(f"thinsection: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"thinsection: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImageError as exc:
        print(f"thinsection: cannot decode image: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"thinsection: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, CorpusEmpty) as exc:
        print(f"thinsection: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
