"""Command-line entry point: plain-file pipelines over the library.

Stages hand off through documented files (trace CSV, fingerprint/layout/
session JSON, estimate JSON-lines) so each is independently testable.
Exit codes: 2 usage, 3 bad file/format, 4 precondition or domain violation;
failures print one machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .errors import (
    AmbiguousPolarityError,
    DomainError,
    FormatError,
    IllConditionedAnchorsError,
    IncompleteFingerprintError,
    InsufficientDataError,
    MagkeyError,
)
from .estimate import estimate_key_cell
from .evaluate import (
    EvalParams,
    EvalReport,
    build_sim_fingerprint,
    export_cdf,
    export_heatmap,
    make_click_corpus,
    random_cell_clicks,
    run_accuracy_eval,
    run_calculator_case,
    run_cross_table,
    segmentation_sweep,
)
from .fingerprint import Fingerprint, build_fingerprint
from .keymap import KeyLayout, calculator_layout, validate_layout
from .offset import (
    Polarity,
    SilenceStats,
    apply_polarity,
    detect_polarity,
    estimate_silence,
    remove_silence,
)
from .regen import AffineMap, fit_affine, regenerate
from .segment import SegmenterConfig, segment_stream
from .simulate import synth_trace
from .trace import read_trace_csv, write_trace_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_PRECONDITION = 4

SESSION_VERSION = 1


# -- session files ---------------------------------------------------------

def load_session(path) -> dict:
    p = Path(path)
    if not p.exists():
        return {"sv": SESSION_VERSION, "silence": None, "polarity": "normal",
                "affine": None, "fingerprint": None, "layout": None}
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if d.get("sv") != SESSION_VERSION:
        raise FormatError(f"{path}: unsupported session version {d.get('sv')!r}")
    return d


def save_session(session: dict, path) -> None:
    Path(path).write_text(json.dumps(session, sort_keys=True, indent=1) + "\n")


def session_silence(session: dict) -> SilenceStats:
    if not session.get("silence"):
        raise DomainError("session has no silence stats; run the silence command first")
    return SilenceStats.from_dict(session["silence"])


def session_fingerprint(session: dict, override: str | None) -> Fingerprint:
    ref = override or session.get("fingerprint")
    if not ref:
        raise DomainError("no fingerprint file given (flag or session reference)")
    fp = Fingerprint.load(ref)
    if session.get("affine"):
        fp = regenerate(fp, AffineMap.from_dict(session["affine"]))
    return fp


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    scenario, path, rate, transition = cfg.load_scenario_file(args.scenario)
    if not path:
        raise DomainError("scenario file has an empty path")
    trace = synth_trace(scenario.board, scenario.env, scenario.magnet, path,
                        rate, transition, rng=args.seed)
    write_trace_csv(trace, args.out)
    print(f"wrote {len(trace)} samples to {args.out}")
    return EXIT_OK


def cmd_silence(args) -> int:
    trace = read_trace_csv(args.trace)
    stats = estimate_silence(trace)
    session = load_session(args.session)
    session["silence"] = stats.as_dict()
    save_session(session, args.session)
    print(json.dumps(stats.as_dict()))
    return EXIT_OK


def cmd_polarity(args) -> int:
    trace = read_trace_csv(args.trace)
    session = load_session(args.session)
    stats = session_silence(session)
    fp = session_fingerprint(session, args.fingerprint)
    window = remove_silence(trace, stats).b
    result = detect_polarity(window, fp, args.cell)
    session["polarity"] = result.value
    if args.fingerprint:
        session["fingerprint"] = args.fingerprint
    save_session(session, args.session)
    print(json.dumps({"polarity": result.value, "cell": args.cell}))
    return EXIT_OK


def cmd_fingerprint_build(args) -> int:
    if args.traces_dir:
        traces_dir = Path(args.traces_dir)
        session = load_session(args.session) if args.session else None
        stats = session_silence(session) if session else None
        scenario = cfg.load_base_config(cfg.resolve_config_path(args.config))
        per_cell = {}
        for cell in range(scenario.board.n_cells):
            f = traces_dir / f"cell_{cell:03d}.csv"
            if f.exists():
                tr = read_trace_csv(f)
                per_cell[cell] = (remove_silence(tr, stats) if stats else tr).b
        fp = build_fingerprint(per_cell, scenario.board, args.bin_width,
                               meta={"source": "files"})
    else:
        scenario = cfg.load_base_config(cfg.resolve_config_path(args.config))
        fp, _ = build_sim_fingerprint(scenario, seed=args.seed, bin_width=args.bin_width,
                                      meta={"source": "simulation", "seed": args.seed})
    fp.save(args.out)
    print(f"wrote fingerprint ({fp.n_cells} cells) to {args.out}")
    return EXIT_OK


def _parse_anchor_spec(spec: str) -> list[tuple[int, str]]:
    out = []
    for part in spec.split(","):
        cell, _, fname = part.partition(":")
        if not fname:
            raise DomainError(f"anchor {part!r}: expected CELL:TRACE_CSV")
        out.append((int(cell), fname))
    return out


def cmd_regen_fit(args) -> int:
    session = load_session(args.session)
    fp = Fingerprint.load(args.fingerprint)
    stats = session_silence(session)
    anchors = []
    for cell, fname in _parse_anchor_spec(args.anchors):
        trace = read_trace_csv(fname)
        window = remove_silence(trace, stats).b
        if session.get("polarity") == "flipped":
            window = -window
        anchors.append((cell, window))
    amap = fit_affine(anchors, fp, method=args.method)
    session["affine"] = amap.as_dict()
    session["fingerprint"] = args.fingerprint
    save_session(session, args.session)
    print(json.dumps(amap.as_dict()))
    return EXIT_OK


def cmd_regen_apply(args) -> int:
    fp = Fingerprint.load(args.fingerprint)
    if args.session:
        session = load_session(args.session)
        if not session.get("affine"):
            raise DomainError("session has no fitted map; run regen fit first")
        amap = AffineMap.from_dict(session["affine"])
    else:
        amap = AffineMap(np.asarray(args.gain), np.asarray(args.offset))
    out = regenerate(fp, amap, meta={"regenerated": True})
    out.save(args.out)
    print(f"wrote regenerated fingerprint to {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    trace = read_trace_csv(args.trace)
    stats = session_silence(load_session(args.session))
    off = remove_silence(trace, stats)
    strokes = segment_stream(off.b, SegmenterConfig(args.var_threshold, args.window,
                                                    args.min_dwell))
    with open(args.out, "w") as fh:
        fh.write("start_idx,end_idx,start_t,end_t\n")
        for ks in strokes:
            fh.write(f"{ks.start},{ks.end},{trace.t[ks.start]!r},{trace.t[ks.end]!r}\n")
    print(f"wrote {len(strokes)} keystrokes to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    trace = read_trace_csv(args.trace)
    session = load_session(args.session)
    stats = session_silence(session)
    fp = session_fingerprint(session, args.fingerprint)
    polarity = Polarity.FLIPPED if session.get("polarity") == "flipped" else Polarity.NORMAL
    off = apply_polarity(remove_silence(trace, stats), polarity)
    strokes = segment_stream(off.b, SegmenterConfig(args.var_threshold, args.window,
                                                    args.min_dwell))
    axes = tuple(args.axes) if args.axes else None
    with open(args.out, "w") as fh:
        for ks in strokes:
            window = ks.samples[:args.window_len]
            est = estimate_key_cell(window, fp, top_k=args.top_k, axes=axes)
            rec = {
                "t_start": float(trace.t[ks.start]),
                "t_end": float(trace.t[ks.end]),
                "mode": est.mode,
                "cell": est.cell,
                "pos": [float(est.pos[0]), float(est.pos[1])],
                "top": [{"cell": c, "p": p} for c, p in est.top],
            }
            fh.write(json.dumps(rec) + "\n")
    print(f"wrote {len(strokes)} estimates to {args.out}")
    return EXIT_OK


def cmd_mapkeys(args) -> int:
    layout = KeyLayout.load(args.layout)
    cell_to_key = layout.cell_to_key
    n = 0
    with open(args.estimates) as src, open(args.out, "w") as dst:
        for line in src:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{args.estimates}: invalid JSON line: {exc}") from exc
            if rec["mode"] == "discrete":
                cell = int(rec["cell"])
            else:
                size = layout.grid.cell_size
                x, y = rec["pos"]
                col = min(int(x // size), layout.grid.cols - 1)
                row = min(int(y // size), layout.grid.rows - 1)
                cell = row * layout.grid.cols + col
            key = cell_to_key.get(cell)
            out = {
                "t_start": rec["t_start"], "t_end": rec["t_end"],
                "key": key.id if key else None,
                "label": key.label if key else None,
                "cell": cell,
            }
            dst.write(json.dumps(out) + "\n")
            n += 1
    print(f"wrote {n} key events to {args.out}")
    return EXIT_OK


def cmd_layout_validate(args) -> int:
    layout = KeyLayout.load(args.layout)
    violations = validate_layout(layout)
    if not violations:
        print("ok")
        return EXIT_OK
    for v in violations:
        print(f"{v.kind}: {v.message}")
    return EXIT_PRECONDITION


def _eval_scenario(args) -> tuple:
    scenario = cfg.load_base_config(cfg.resolve_config_path(args.config))
    fp, stats = build_sim_fingerprint(scenario, seed=args.seed)
    return scenario, fp, stats


def cmd_eval_accuracy(args) -> int:
    scenario, fp, stats = _eval_scenario(args)
    params = EvalParams(window_len=args.window_len, top_k=args.top_k,
                        axes=tuple(args.axes) if args.axes else ("x", "y", "z"),
                        n_per_cell=args.n_per_cell, n_continuous=args.n_continuous,
                        seed=args.seed)
    report = run_accuracy_eval(fp, scenario, params, silence=stats)
    report.save(args.out)
    line = {"discrete_accuracy": report.discrete.get("accuracy"),
            "continuous_median_cm": report.continuous.get("median_cm")}
    print(json.dumps(line))
    return EXIT_OK


def cmd_eval_cross(args) -> int:
    scenario, fp, stats = _eval_scenario(args)
    variants = []
    for label in args.variants:
        magnet = cfg.default_magnet(label)
        variants.append((label, cfg.SimScenario(scenario.board, scenario.env, magnet)))
    table = run_cross_table(fp, stats, variants,
                            EvalParams(n_per_cell=args.n_per_cell, seed=args.seed))
    Path(args.out).write_text(json.dumps(table, sort_keys=True, indent=1) + "\n")
    for pair, entry in table["pairs"].items():
        print(pair, json.dumps(entry))
    return EXIT_OK


def cmd_eval_heatmap(args) -> int:
    report = EvalReport.load(args.report)
    scenario = cfg.load_base_config(cfg.resolve_config_path(args.config))
    export_heatmap(report, scenario.board, args.out, section=args.section)
    print(f"wrote heatmap to {args.out}")
    return EXIT_OK


def cmd_eval_cdf(args) -> int:
    report = EvalReport.load(args.report)
    section = args.section or ("continuous" if report.continuous else "discrete")
    export_cdf(report, args.out, section=section)
    print(f"wrote cdf to {args.out}")
    return EXIT_OK


def cmd_eval_calculator(args) -> int:
    scenario, fp, stats = _eval_scenario(args)
    layout = (KeyLayout.load(args.layout) if args.layout
              else calculator_layout(scenario.board.shape, origin_col=4))
    result = run_calculator_case(fp, layout, scenario, seed=args.seed,
                                 clicks_per_key=args.clicks_per_key)
    print(result.summary())
    return EXIT_OK


def cmd_eval_segment(args) -> int:
    scenario, fp, stats = _eval_scenario(args)
    clicks = random_cell_clicks(scenario.board, args.clicks, seed=args.seed + 1)
    corpus = make_click_corpus(scenario, clicks, seed=args.seed + 2)
    rows = segmentation_sweep(corpus, args.taus)
    with open(args.out, "w") as fh:
        fh.write("tau,tp,fp,fn,accuracy,n_keystrokes,recall\n")
        for r in rows:
            fh.write(f"{r['tau']!r},{r['tp']},{r['fp']},{r['fn']},"
                     f"{r['accuracy']!r},{r['n_keystrokes']},{r['recall']!r}\n")
    print(f"wrote sweep ({len(rows)} rows) to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.rpartition(":")
    app = create_app(layout_dir=args.layout_dir,
                     config_path=cfg.resolve_config_path(args.config),
                     seed=args.seed)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="magkey",
                                 description="magnet-over-grid keystroke localization")
    ap.add_argument("--seed", type=int, default=0, help="seed for anything randomized")
    ap.add_argument("--config", help="base scenario config JSON (or MAGKEY_CONFIG)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scenario JSON -> trace CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("silence", help="estimate silence stats into a session file")
    p.add_argument("--trace", required=True)
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_silence)

    p = sub.add_parser("polarity",
                       help="detect magnet polarity from a reference-cell capture")
    p.add_argument("--trace", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--fingerprint", help="override session fingerprint reference")
    p.add_argument("--cell", type=int, required=True)
    p.set_defaults(func=cmd_polarity)

    p = sub.add_parser("fingerprint", help="fingerprint operations")
    fsub = p.add_subparsers(dest="fp_command", required=True)
    b = fsub.add_parser("build", help="build a factory fingerprint")
    b.add_argument("--out", required=True)
    b.add_argument("--bin-width", type=float, default=cfg.BIN_WIDTH_UT)
    b.add_argument("--traces-dir", help="directory of cell_NNN.csv captures")
    b.add_argument("--session", help="session file with silence stats (file mode)")
    b.set_defaults(func=cmd_fingerprint_build)

    p = sub.add_parser("regen", help="first-use fingerprint regeneration")
    rsub = p.add_subparsers(dest="regen_command", required=True)
    f = rsub.add_parser("fit", help="fit gain/offset from two anchor captures")
    f.add_argument("--session", required=True)
    f.add_argument("--fingerprint", required=True)
    f.add_argument("--anchors", required=True, help="CELL:TRACE_CSV,CELL:TRACE_CSV")
    f.add_argument("--method", choices=("means", "lsq"), default="means")
    f.set_defaults(func=cmd_regen_fit)
    a = rsub.add_parser("apply", help="transport a fingerprint through a fitted map")
    a.add_argument("--fingerprint", required=True)
    a.add_argument("--session")
    a.add_argument("--gain", type=float, nargs=3)
    a.add_argument("--offset", type=float, nargs=3)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_regen_apply)

    p = sub.add_parser("segment", help="trace CSV -> keystroke CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--var-threshold", type=float, default=10.0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-dwell", type=int, default=20)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("estimate", help="trace CSV -> JSON-lines estimates")
    p.add_argument("--trace", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--fingerprint", help="override session fingerprint reference")
    p.add_argument("--out", required=True)
    p.add_argument("--window-len", type=int, default=cfg.ESTIMATE_WINDOW)
    p.add_argument("--top-k", type=int, default=1)
    p.add_argument("--axes", choices=("x", "y", "z"), nargs="+")
    p.add_argument("--var-threshold", type=float, default=10.0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-dwell", type=int, default=20)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mapkeys", help="estimates JSONL + layout -> key events JSONL")
    p.add_argument("--estimates", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mapkeys)

    p = sub.add_parser("layout", help="layout operations")
    lsub = p.add_subparsers(dest="layout_command", required=True)
    v = lsub.add_parser("validate", help="report layout violations")
    v.add_argument("--layout", required=True)
    v.set_defaults(func=cmd_layout_validate)

    p = sub.add_parser("eval", help="evaluation harness")
    esub = p.add_subparsers(dest="eval_command", required=True)
    e = esub.add_parser("accuracy", help="discrete/continuous accuracy report")
    e.add_argument("--out", required=True)
    e.add_argument("--window-len", type=int, default=cfg.ESTIMATE_WINDOW)
    e.add_argument("--top-k", type=int, default=1)
    e.add_argument("--axes", choices=("x", "y", "z"), nargs="+")
    e.add_argument("--n-per-cell", type=int, default=10)
    e.add_argument("--n-continuous", type=int, default=0)
    e.set_defaults(func=cmd_eval_accuracy)
    e = esub.add_parser("cross", help="cross magnet/device table")
    e.add_argument("--out", required=True)
    e.add_argument("--variants", nargs="+", default=["ring", "cube", "toy"])
    e.add_argument("--n-per-cell", type=int, default=3)
    e.set_defaults(func=cmd_eval_cross)
    e = esub.add_parser("heatmap", help="report JSON -> per-cell mean error CSV grid")
    e.add_argument("--report", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--section", choices=("discrete", "continuous"), default="discrete")
    e.set_defaults(func=cmd_eval_heatmap)
    e = esub.add_parser("cdf", help="report JSON -> sorted error CSV")
    e.add_argument("--report", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--section", choices=("discrete", "continuous"))
    e.set_defaults(func=cmd_eval_cdf)
    e = esub.add_parser("calculator", help="closed-loop calculator case study")
    e.add_argument("--layout", help="layout JSON; default built-in calculator")
    e.add_argument("--clicks-per-key", type=int, default=20)
    e.set_defaults(func=cmd_eval_calculator)
    e = esub.add_parser("segment", help="variance-threshold sweep on a click corpus")
    e.add_argument("--out", required=True)
    e.add_argument("--clicks", type=int, default=200)
    e.add_argument("--taus", type=float, nargs="+",
                   default=[1, 2, 5, 10, 20, 50, 100])
    e.set_defaults(func=cmd_eval_segment)

    p = sub.add_parser("serve", help="run the layout/session HTTP service")
    p.add_argument("--addr", default="127.0.0.1:8600")
    p.add_argument("--layout-dir", default="layouts")
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(json.dumps({"error": "format", "message": str(exc)}), file=sys.stderr)
        return EXIT_FORMAT
    except (DomainError, InsufficientDataError, IncompleteFingerprintError,
            IllConditionedAnchorsError, AmbiguousPolarityError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_PRECONDITION
    except MagkeyError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_PRECONDITION
    except FileNotFoundError as exc:
        print(json.dumps({"error": "missing_file", "message": str(exc)}), file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
