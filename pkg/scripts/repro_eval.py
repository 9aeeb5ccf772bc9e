#!/usr/bin/env python3
"""Reproduce the headline evaluation artifacts as CSV/JSON files.

    PYTHONPATH=src python3 scripts/repro_eval.py --outdir results/

Writes:
  accuracy_k1.json / accuracy_k2.json   discrete + continuous reports
  heatmap_weak.csv                      per-cell mean error, weak magnet in noise
  cdf_continuous.csv                    sorted continuous errors (k=2)
  cross_magnets.json                    train/test table over ring/cube/toy
  segmentation_sweep.csv                threshold sweep on a 200-click corpus
  calculator.txt                        closed-loop click case summary
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from magkey.config import SimScenario, default_env, default_magnet, default_scenario
from magkey.evaluate import (
    EvalParams,
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
from magkey.keymap import calculator_layout


def main() -> None:
    ap = argparse.ArgumentParser(description="evaluation reproduction runs")
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    scenario = default_scenario()
    fp, silence = build_sim_fingerprint(scenario, seed=args.seed)

    for k in (1, 2):
        rep = run_accuracy_eval(
            fp, scenario,
            EvalParams(top_k=k, n_per_cell=10, n_continuous=1000, seed=303),
            silence=silence)
        rep.save(out / f"accuracy_k{k}.json")
        print(f"k={k}: discrete accuracy={rep.discrete['accuracy']:.4f} "
              f"continuous median={rep.continuous['median_cm'] * 10:.2f}mm")
        if k == 2:
            export_cdf(rep, out / "cdf_continuous.csv")

    weak = SimScenario(scenario.board, default_env(1.25), default_magnet("toy"))
    fp_w, sil_w = build_sim_fingerprint(weak, seed=414)
    rep_w = run_accuracy_eval(fp_w, weak, EvalParams(n_per_cell=10, seed=515),
                              silence=sil_w)
    export_heatmap(rep_w, weak.board, out / "heatmap_weak.csv")
    print(f"weak-magnet heatmap: accuracy={rep_w.discrete['accuracy']:.4f}")

    variants = [
        ("ring", scenario),
        ("cube", SimScenario(scenario.board, scenario.env, default_magnet("cube"))),
        ("toy", SimScenario(scenario.board, scenario.env, default_magnet("toy"))),
    ]
    table = run_cross_table(fp, silence, variants, EvalParams(n_per_cell=3, seed=99))
    (out / "cross_magnets.json").write_text(json.dumps(table, sort_keys=True, indent=1))
    print("cross table written")

    clicks = random_cell_clicks(scenario.board, 200, seed=881)
    corpus = make_click_corpus(scenario, clicks, seed=882)
    rows = segmentation_sweep(corpus, [1, 2, 5, 10, 20, 50, 100])
    with open(out / "segmentation_sweep.csv", "w") as fh:
        fh.write("tau,tp,fp,fn,accuracy,n_keystrokes,recall\n")
        for r in rows:
            fh.write(f"{r['tau']},{r['tp']},{r['fp']},{r['fn']},"
                     f"{r['accuracy']},{r['n_keystrokes']},{r['recall']}\n")
    print("segmentation sweep written")

    layout = calculator_layout(scenario.board.shape, origin_col=4)
    case = run_calculator_case(fp, layout, scenario, seed=0)
    (out / "calculator.txt").write_text(case.summary() + "\n")
    print(f"calculator case: {case.summary()}")


if __name__ == "__main__":
    main()
