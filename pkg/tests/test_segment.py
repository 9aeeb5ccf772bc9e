import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

from magkey.config import default_env
from magkey.errors import DomainError
from magkey.evaluate import make_click_corpus, segmentation_sweep
from magkey.offset import estimate_silence, remove_silence
from magkey.segment import SegmenterConfig, segment_stream, window_variance
from magkey.simulate import ABSENT, EnvSpec, MagnetSpec, synth_trace

from oracles import naive_window_variance


def test_constant_trace_single_keystroke():
    cfg = SegmenterConfig()
    b = np.tile([5.0, -3.0, 8.0], (100, 1))
    strokes = segment_stream(b, cfg)
    assert len(strokes) == 1
    assert strokes[0].start == cfg.window - 1
    assert strokes[0].end == 99
    assert np.array_equal(strokes[0].samples, b[4:100])


def test_three_spot_click_trace(scenario):
    """A glide trace over three spots yields exactly three keystrokes in order."""
    board = scenario.board
    env = default_env(0.2)
    spots = [board.centroid(30), board.centroid(75), board.centroid(110)]
    path = [((s[0], s[1]), 1.5) for s in spots]
    rng = np.random.default_rng(42)
    silence = estimate_silence(
        synth_trace(board, env, scenario.magnet, [(ABSENT, 15.0)], 50.0, rng=rng))
    trace = synth_trace(board, env, scenario.magnet, path, 50.0, 0.5, rng=rng)
    off = remove_silence(trace, silence)
    strokes = segment_stream(off.b, SegmenterConfig())
    assert len(strokes) == 3
    starts = [ks.start for ks in strokes]
    assert starts == sorted(starts)
    # each keystroke sits inside its dwell (75 samples dwell + 25 transition)
    for i, ks in enumerate(strokes):
        lo = i * 100
        hi = lo + 75
        assert lo <= ks.start <= ks.end <= hi + 2


def test_keystrokes_disjoint_and_min_dwell():
    rng = np.random.default_rng(0)
    b = rng.normal(0, 0.2, (400, 3))
    b[100:150] += 100.0  # one burst of motion
    b[101] += 300.0
    strokes = segment_stream(b, SegmenterConfig(var_threshold=10.0))
    for a, c in zip(strokes, strokes[1:]):
        assert a.end < c.start - 0
    for ks in strokes:
        assert len(ks) >= 20


def test_window_variance_alignment_and_values():
    b = np.zeros((10, 3))
    b[5, 0] = 10.0
    v = window_variance(b, 5)
    assert v.shape == (6,)
    assert np.allclose(v, naive_window_variance(b, 5))


def test_too_short_trace_rejected():
    with pytest.raises(DomainError):
        window_variance(np.zeros((3, 3)), 5)


@hypothesis.given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 50.0))
@hypothesis.settings(max_examples=25, deadline=None)
def test_scaling_invariance(seed, scale):
    """Scaling the trace by c and the threshold by c^2 keeps decisions fixed."""
    rng = np.random.default_rng(seed)
    b = rng.normal(0, 1.0, (120, 3))
    b[40:60] += rng.normal(0, 8.0, (20, 3))
    cfg = SegmenterConfig(var_threshold=4.0)
    cfg_scaled = SegmenterConfig(var_threshold=4.0 * scale * scale)
    a = segment_stream(b, cfg)
    c = segment_stream(b * scale, cfg_scaled)
    assert [(k.start, k.end) for k in a] == [(k.start, k.end) for k in c]


@hypothesis.given(st.integers(0, 2 ** 32 - 1))
@hypothesis.settings(max_examples=20, deadline=None)
def test_window_variance_matches_naive(seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(0, 5.0, (60, 3))
    assert np.allclose(window_variance(b, 5), naive_window_variance(b, 5))


def test_z_axis_contributes_to_motion_detection():
    """A vertical-moment magnet approached radially moves only the z reading;
    the move is detected with z in the statistic and missed without it."""
    board_kwargs = dict(rows=8, cols=18, cell_size=2.0,
                        sensor_pos=np.array([18.0, 8.0, 0.5]), magnet_height=0.5)
    from magkey.board import BoardSpec
    board = BoardSpec(**board_kwargs)
    env = EnvSpec(noise_sigma=0.0)
    magnet = MagnetSpec(np.array([0.0, 0.0, 3.0e5]))
    # radial move away from the sensor at its own height: x,y fields vanish
    path = [((25.0, 8.0), 1.0), ((33.0, 8.0), 1.0)]
    trace = synth_trace(board, env, magnet, path, 50.0, 0.5)
    silence = np.broadcast_to(env.earth_field, trace.b.shape)
    off = trace.b - silence
    assert np.allclose(off[:, :2], 0.0, atol=1e-9)
    v_all = window_variance(off, 5)
    v_xy = window_variance(np.concatenate([off[:, :2], np.zeros((len(off), 1))], axis=1), 5)
    tau = 10.0
    assert v_all.max() > tau        # detected with z included
    assert v_xy.max() <= tau        # missed without it


def test_sweep_shape_on_click_corpus(scenario):
    from magkey.evaluate import random_cell_clicks
    clicks = random_cell_clicks(scenario.board, 30, seed=5)
    corpus = make_click_corpus(scenario, clicks, seed=6)
    rows = segmentation_sweep(corpus, [1, 2, 5, 10, 20, 50, 100])
    fps = [r["fp"] for r in rows]
    fns = [r["fn"] for r in rows]
    assert all(a >= b for a, b in zip(fps, fps[1:]))
    assert all(a <= b for a, b in zip(fns, fns[1:]))
    accs = [r["accuracy"] for r in rows]
    assert max(accs) > accs[0] and max(accs) > accs[-1]
    at_default = next(r for r in rows if r["tau"] == 10.0)
    assert at_default["recall"] == 1.0
    assert at_default["n_keystrokes"] == 30
