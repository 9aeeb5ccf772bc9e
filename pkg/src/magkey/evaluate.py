"""Closed-loop evaluation harness: simulated captures in, metrics out.

Everything here is reproducible bit-exact from (config, seed): fingerprint
builds, labeled test keystrokes at cell centroids and at uniform random
positions, cross-magnet/device tables via the regeneration path, the
calculator-style click case with segmentation in the loop, and segmentation
threshold sweeps. Reports carry a hash of the generating configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .board import BoardSpec
from .config import (
    ANCHOR_S,
    ESTIMATE_WINDOW,
    FINGERPRINT_DWELL_S,
    LIFT_TRANSITION_S,
    SAMPLE_RATE_HZ,
    SILENCE_S,
    TRAIN_SPREAD_CORE_CM,
    TRAIN_SPREAD_UNIFORM_FRAC,
    SimScenario,
)
from .errors import DomainError
from .estimate import estimate_key_cell
from .fingerprint import Fingerprint, build_fingerprint
from .keymap import KeyLayout, map_key
from .offset import SilenceStats, estimate_silence, remove_silence
from .regen import default_anchor_cells, fit_affine, regenerate
from .segment import SegmenterConfig, segment_stream, window_variance
from .simulate import ABSENT, fields_at_positions, plan_path, synth_trace
from .trace import Trace


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def scenario_hash(scenario: SimScenario, extra: dict | None = None) -> str:
    payload = {"scenario": scenario.as_dict(), "extra": extra or {}}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- simulated captures -------------------------------------------------

def jittered_cell_positions(board: BoardSpec, cell: int, n: int, rng) -> np.ndarray:
    """Hand-placement model for a calibration dwell: positions within the cell.

    Mostly a tight Gaussian around the centroid, with a uniform fraction of
    off-center rests; both components clip to the cell bounds.
    """
    c = board.centroid(cell)
    h = board.cell_size / 2
    dx = np.clip(rng.normal(0.0, TRAIN_SPREAD_CORE_CM, n), -h, h)
    dy = np.clip(rng.normal(0.0, TRAIN_SPREAD_CORE_CM, n), -h, h)
    off = rng.random(n) < TRAIN_SPREAD_UNIFORM_FRAC
    dx[off] = rng.uniform(-h, h, int(off.sum()))
    dy[off] = rng.uniform(-h, h, int(off.sum()))
    return np.stack([c[0] + dx, c[1] + dy], axis=1)


def capture_cell_window(scenario: SimScenario, cell: int, n: int, rng) -> np.ndarray:
    """Raw measured samples of one calibration dwell at a cell (not offset-free)."""
    rng = _rng(rng)
    xy = jittered_cell_positions(scenario.board, cell, n, rng)
    return fields_at_positions(scenario.board, scenario.env, scenario.magnet, xy, rng)


def simulate_silence(scenario: SimScenario, duration_s: float = SILENCE_S,
                     rng=None, rate_hz: float = SAMPLE_RATE_HZ) -> Trace:
    return synth_trace(scenario.board, scenario.env, scenario.magnet,
                       [(ABSENT, duration_s)], rate_hz, rng=_rng(rng))


def build_sim_fingerprint(scenario: SimScenario, seed, dwell_s: float = FINGERPRINT_DWELL_S,
                          bin_width: float = 1.0, meta: dict | None = None,
                          rate_hz: float = SAMPLE_RATE_HZ) -> tuple[Fingerprint, SilenceStats]:
    """Run the factory calibration protocol in simulation.

    One silence capture, then a ``dwell_s`` hand-placed capture per cell;
    offset-free traces feed the histogram build. Returns the fingerprint and
    the silence stats used.
    """
    rng = _rng(seed)
    stats = estimate_silence(simulate_silence(scenario, rng=rng, rate_hz=rate_hz))
    n = int(round(dwell_s * rate_hz))
    per_cell = {}
    for cell in range(scenario.board.n_cells):
        per_cell[cell] = capture_cell_window(scenario, cell, n, rng) - stats.mean
    fp = build_fingerprint(per_cell, scenario.board, bin_width, meta)
    return fp, stats


# -- accuracy evaluation -------------------------------------------------

@dataclass(frozen=True)
class EvalParams:
    """Knobs for one accuracy run; mirrors the system defaults."""

    window_len: int = ESTIMATE_WINDOW        # successive samples per estimate
    top_k: int = 1                           # spatial-averaging width (continuous)
    axes: tuple = ("x", "y", "z")
    n_per_cell: int = 10                     # discrete keystrokes per cell
    n_continuous: int = 0                    # uniform random test positions
    seed: int = 0
    density: float | None = None             # expected cell size, validation only

    def as_dict(self) -> dict:
        return {
            "window_len": self.window_len, "top_k": self.top_k,
            "axes": list(self.axes), "n_per_cell": self.n_per_cell,
            "n_continuous": self.n_continuous, "seed": self.seed,
            "density": self.density,
        }


@dataclass
class EvalReport:
    """Accuracy metrics plus raw error lists for exports."""

    config_hash: str
    params: dict
    discrete: dict = field(default_factory=dict)    # accuracy, errors, per-cell stats
    continuous: dict = field(default_factory=dict)  # median/mean, errors, per-cell stats

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "params": self.params,
            "discrete": self.discrete,
            "continuous": self.continuous,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @staticmethod
    def load(path) -> "EvalReport":
        d = json.loads(Path(path).read_text())
        return EvalReport(d["config_hash"], d["params"], d["discrete"], d["continuous"])


def _per_cell_stats(cells: np.ndarray, errors: np.ndarray, n_cells: int) -> list:
    out = []
    for c in range(n_cells):
        e = errors[cells == c]
        if e.size == 0:
            out.append({"cell": c, "n": 0, "mean": None, "p50": None, "p75": None})
        else:
            out.append({
                "cell": c, "n": int(e.size),
                "mean": float(e.mean()),
                "p50": float(np.percentile(e, 50)),
                "p75": float(np.percentile(e, 75)),
            })
    return out


def run_accuracy_eval(fp: Fingerprint, scenario: SimScenario, params: EvalParams,
                      silence: SilenceStats | None = None) -> EvalReport:
    """Generate labeled test keystrokes and score the full estimation path.

    Discrete tests place the magnet at every cell centroid ``n_per_cell``
    times and check the argmax cell; continuous tests draw uniform positions
    over the board interior (half-cell margin) and use top-k fusion. Distance
    error is the Euclidean gap between estimate and truth in cm.
    """
    board = scenario.board
    if fp.board.shape != board.shape:
        raise DomainError(
            f"fingerprint grid {fp.board.shape} incompatible with scenario {board.shape}")
    if params.density is not None and abs(board.cell_size - params.density) > 1e-9:
        raise DomainError(
            f"requested density {params.density} cm but grid cells are {board.cell_size} cm")
    rng = _rng(params.seed)
    if silence is None:
        silence = estimate_silence(simulate_silence(scenario, rng=rng))
    report = EvalReport(scenario_hash(scenario, params.as_dict()), params.as_dict())
    m = params.window_len
    cents = board.centroids()

    if params.n_per_cell > 0:
        truth, errors, hits = [], [], 0
        for cell in range(board.n_cells):
            xy = np.repeat(cents[cell][None, :], params.n_per_cell * m, axis=0)
            w = fields_at_positions(board, scenario.env, scenario.magnet, xy, rng)
            w = (w - silence.mean).reshape(params.n_per_cell, m, 3)
            for i in range(params.n_per_cell):
                est = estimate_key_cell(w[i], fp, top_k=1, axes=params.axes)
                hits += est.cell == cell
                truth.append(cell)
                errors.append(float(np.linalg.norm(cents[est.cell] - cents[cell])))
        truth = np.asarray(truth)
        errors = np.asarray(errors)
        report.discrete = {
            "n": int(truth.size),
            "accuracy": hits / truth.size,
            "mean_cm": float(errors.mean()),
            "median_cm": float(np.percentile(errors, 50)),
            "p75_cm": float(np.percentile(errors, 75)),
            "errors_cm": [float(e) for e in errors],
            "per_cell": _per_cell_stats(truth, errors, board.n_cells),
        }

    if params.n_continuous > 0:
        h = board.cell_size / 2
        xs = rng.uniform(h, board.width - h, params.n_continuous)
        ys = rng.uniform(h, board.height - h, params.n_continuous)
        truth_cells, errors = [], []
        for x, y in zip(xs, ys):
            xy = np.repeat([[x, y]], m, axis=0)
            w = fields_at_positions(board, scenario.env, scenario.magnet, xy, rng) - silence.mean
            est = estimate_key_cell(w, fp, top_k=params.top_k, axes=params.axes)
            errors.append(float(np.hypot(est.pos[0] - x, est.pos[1] - y)))
            truth_cells.append(board.cell_at(x, y))
        truth_cells = np.asarray(truth_cells)
        errors = np.asarray(errors)
        report.continuous = {
            "n": int(errors.size),
            "top_k": params.top_k,
            "mean_cm": float(errors.mean()),
            "median_cm": float(np.percentile(errors, 50)),
            "p75_cm": float(np.percentile(errors, 75)),
            "errors_cm": [float(e) for e in errors],
            "per_cell": _per_cell_stats(truth_cells, errors, board.n_cells),
        }
    return report


# -- cross-magnet / cross-device tables ----------------------------------

def run_cross_table(master_fp: Fingerprint, master_silence: SilenceStats,
                    variants, params: EvalParams, anchors=None,
                    anchor_s: float = ANCHOR_S,
                    rate_hz: float = SAMPLE_RATE_HZ) -> dict:
    """Train/test matrix over hardware variants via first-use regeneration.

    ``variants`` is a list of (label, SimScenario). The train-side fingerprint
    is the master regenerated from two anchor captures taken with the train
    variant; before evaluation it is adapted once more to the test variant,
    exactly as a user's first-use calibration would. Off-diagonal entries
    therefore carry the residual of chaining two fits, which grows as either
    variant gets weaker relative to sensor noise. Per-pair failures are
    recorded in the result rather than raised.
    """
    if len(variants) < 2:
        raise DomainError("cross table needs at least two variants")
    if anchors is None:
        anchors = default_anchor_cells(master_fp)
    n_anchor = int(round(anchor_s * rate_hz))
    table: dict = {"anchors": list(anchors), "pairs": {}}

    def anchor_windows(sc, rng, silence):
        return [(c, capture_cell_window(sc, c, n_anchor, rng) - silence.mean)
                for c in anchors]

    trained: dict = {}
    for idx, (label, sc) in enumerate(variants):
        rng = _rng(params.seed * 7919 + 13 + idx)
        stats = estimate_silence(simulate_silence(sc, rng=rng, rate_hz=rate_hz))
        try:
            amap = fit_affine(anchor_windows(sc, rng, stats), master_fp)
            trained[label] = regenerate(master_fp, amap, {"variant": label})
        except Exception as exc:  # noqa: BLE001 - recorded per pair below
            trained[label] = exc

    for train_label, _ in variants:
        for test_idx, (test_label, test_sc) in enumerate(variants):
            key = f"{train_label}->{test_label}"
            fp_t = trained[train_label]
            if isinstance(fp_t, Exception):
                table["pairs"][key] = {"error": str(fp_t)}
                continue
            try:
                rng = _rng(params.seed * 104729 + 71 + test_idx)
                stats = estimate_silence(simulate_silence(test_sc, rng=rng, rate_hz=rate_hz))
                if test_label != train_label:
                    amap = fit_affine(anchor_windows(test_sc, rng, stats), fp_t)
                    fp_pair = regenerate(fp_t, amap, {"variant": f"{train_label}->{test_label}"})
                else:
                    fp_pair = fp_t
                rep = run_accuracy_eval(fp_pair, test_sc, params, silence=stats)
            except Exception as exc:  # noqa: BLE001
                table["pairs"][key] = {"error": str(exc)}
                continue
            table["pairs"][key] = {
                "mean_cm": rep.discrete["mean_cm"],
                "p50_cm": rep.discrete["median_cm"],
                "p75_cm": rep.discrete["p75_cm"],
                "accuracy": rep.discrete["accuracy"],
            }
    return table


# -- exports --------------------------------------------------------------

def export_heatmap(report: EvalReport, board: BoardSpec, path, section: str = "discrete") -> None:
    """CSV grid (rows x cols) of per-cell mean distance error in cm."""
    stats = getattr(report, section)["per_cell"]
    grid = np.full((board.rows, board.cols), np.nan)
    for entry in stats:
        if entry["n"]:
            r, c = divmod(entry["cell"], board.cols)
            grid[r, c] = entry["mean"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in range(board.rows):
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in grid[r]])


def export_cdf(report: EvalReport, path, section: str = "continuous") -> None:
    """CSV of sorted distance errors (cm), one per line under an ``error_cm`` header."""
    errors = sorted(getattr(report, section)["errors_cm"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["error_cm"])
        for e in errors:
            w.writerow([repr(float(e))])


# -- click corpora and segmentation metrics -------------------------------

@dataclass(frozen=True)
class ClickCorpus:
    """A synthesized typing session with ground truth dwell spans."""

    trace: Trace                 # raw measured samples
    silence: Trace               # separate magnet-absent capture
    clicks: tuple                # (cell or None, position (x,y)) per click, in order
    dwell_spans: tuple           # inclusive (start, end) sample spans per click
    rate_hz: float

    def moving_mask(self) -> np.ndarray:
        """True where the magnet is in transit (not resting in a click dwell)."""
        mask = np.ones(len(self.trace), dtype=bool)
        for lo, hi in self.dwell_spans:
            mask[lo:hi + 1] = False
        return mask


def make_click_corpus(scenario: SimScenario, positions, seed,
                      dwell_s: float = 1.0, gap_s: float = 0.1,
                      lift_s: float = LIFT_TRANSITION_S,
                      rate_hz: float = SAMPLE_RATE_HZ) -> ClickCorpus:
    """Synthesize a lift-and-place click sequence over the given positions.

    Between consecutive clicks the magnet lifts off the board (brief ABSENT
    hop with fast amplitude ramps), which is how repeated presses of the same
    key stay separable. Ground truth spans cover the on-key dwells.
    """
    board = scenario.board
    rng = _rng(seed)
    path = []
    for i, pos in enumerate(positions):
        if i > 0:
            path.append((ABSENT, gap_s))
        path.append(((float(pos[0]), float(pos[1])), dwell_s))
    silence = simulate_silence(scenario, rng=rng, rate_hz=rate_hz)
    trace = synth_trace(board, scenario.env, scenario.magnet, path, rate_hz, lift_s, rng=rng)
    segs = plan_path(board, path, rate_hz, lift_s)
    spans, clicks = [], []
    for seg in segs:
        if seg.entry is not None and seg.pos0 is not None:
            spans.append((seg.start, seg.start + seg.n - 1))
            clicks.append((board.cell_at(*seg.pos0), seg.pos0))
    return ClickCorpus(trace, silence, tuple(clicks), tuple(spans), rate_hz)


def random_cell_clicks(board: BoardSpec, n_clicks: int, seed, cells=None) -> list:
    """Click positions at the centroids of randomly drawn cells."""
    rng = _rng(seed)
    pool = np.arange(board.n_cells) if cells is None else np.asarray(list(cells))
    chosen = pool[rng.integers(0, pool.size, n_clicks)]
    return [tuple(board.centroid(int(c))) for c in chosen]


def segmentation_sweep(corpus: ClickCorpus, taus, cfg: SegmenterConfig = SegmenterConfig()) -> list:
    """Window-level motion-detection metrics per threshold.

    A window is truly moving when it covers any in-transit sample. For each
    tau: FP = stationary windows flagged moving, FN = moving windows flagged
    stationary, TP = moving windows flagged moving; accuracy = TP/(TP+FP+FN).
    Also reports keystroke recall (dwells recovered) and the emitted count.
    """
    stats = estimate_silence(corpus.silence)
    off = remove_silence(corpus.trace, stats)
    v = window_variance(off.b, cfg.window)
    moving = corpus.moving_mask()
    w = cfg.window
    truth_moving = np.array([moving[t - w + 1:t + 1].any()
                             for t in range(w - 1, len(corpus.trace))])
    rows = []
    for tau in taus:
        pred_moving = v > tau
        tp = int((pred_moving & truth_moving).sum())
        fp = int((pred_moving & ~truth_moving).sum())
        fn = int((~pred_moving & truth_moving).sum())
        strokes = segment_stream(off.b, SegmenterConfig(tau, cfg.window, cfg.min_dwell))
        recovered = _recovered_dwells(corpus.dwell_spans, strokes)
        rows.append({
            "tau": float(tau), "tp": tp, "fp": fp, "fn": fn,
            "accuracy": tp / (tp + fp + fn) if (tp + fp + fn) else 0.0,
            "n_keystrokes": len(strokes),
            "recall": recovered / len(corpus.dwell_spans),
        })
    return rows


def _recovered_dwells(dwell_spans, strokes) -> int:
    recovered = 0
    for lo, hi in dwell_spans:
        if any(lo <= ks.start and ks.end <= hi + 2 for ks in strokes):
            recovered += 1
    return recovered


# -- calculator-style case study ------------------------------------------

@dataclass(frozen=True)
class CaseResult:
    n_clicks: int
    n_keystrokes: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_clicks if self.n_clicks else 0.0

    def summary(self) -> str:
        return f"{self.n_correct}/{self.n_clicks}"


def run_calculator_case(fp: Fingerprint, layout: KeyLayout, scenario: SimScenario,
                        seed, clicks_per_key: int = 20,
                        cfg: SegmenterConfig = SegmenterConfig(),
                        window_len: int = ESTIMATE_WINDOW,
                        dwell_s: float = 1.0,
                        rate_hz: float = SAMPLE_RATE_HZ) -> CaseResult:
    """Click every layout key ``clicks_per_key`` times with segmentation live.

    The click order is a seeded shuffle. Repeated presses of a key land
    across the button's area, modeled by cycling through the fine-grained
    cells the key covers and pressing at their centroids. A click counts as
    correct when exactly one keystroke is recovered inside its dwell and maps
    to the intended key.
    """
    board = scenario.board
    if fp.board.shape != layout.grid or fp.board.shape != board.shape:
        raise DomainError("fingerprint, layout, and scenario grids must match")
    rng = _rng(seed)
    presses = [(key, rep) for key in layout.keys for rep in range(clicks_per_key)]
    order = rng.permutation(len(presses))
    presses = [presses[i] for i in order]
    positions = []
    for key, rep in presses:
        cells = sorted(key.cells)
        positions.append(tuple(board.centroid(cells[rep % len(cells)])))
    presses = [key for key, _ in presses]

    corpus = make_click_corpus(scenario, positions, rng, dwell_s=dwell_s, rate_hz=rate_hz)
    stats = estimate_silence(corpus.silence)
    off = remove_silence(corpus.trace, stats)
    strokes = segment_stream(off.b, cfg)

    by_dwell: dict[int, list] = {}
    for ks in strokes:
        for i, (lo, hi) in enumerate(corpus.dwell_spans):
            if lo <= ks.start and ks.end <= hi + 2:
                by_dwell.setdefault(i, []).append(ks)
                break
    correct = 0
    for i, key in enumerate(presses):
        matched = by_dwell.get(i, [])
        if len(matched) != 1:
            continue
        window = matched[0].samples[:window_len]
        est = estimate_key_cell(window, fp, top_k=1)
        event = map_key(est, layout)
        if event is not None and event.key == key.id:
            correct += 1
    return CaseResult(len(presses), len(strokes), correct)
