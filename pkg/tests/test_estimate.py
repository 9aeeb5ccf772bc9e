import numpy as np
import pytest

from magkey.board import BoardSpec
from magkey.errors import DomainError
from magkey.estimate import estimate_key_cell, posterior
from magkey.fingerprint import build_fingerprint
from magkey.simulate import fields_at_positions

from oracles import fast_naive_argmax


def test_single_cell_board_probability_one():
    board = BoardSpec(rows=1, cols=1, cell_size=2.0)
    fp = build_fingerprint({0: np.tile([5.0, 5.0, 5.0], (120, 1))}, board)
    post = posterior(np.tile([5.0, 5.0, 5.0], (4, 1)), fp)
    assert post.probs[0] == pytest.approx(1.0)
    assert post.argmax == 0


def test_self_consistency_on_training_value():
    board = BoardSpec(rows=2, cols=3, cell_size=2.0)
    values = [np.array([10.0 * c + 0.5, -4.0 * c + 0.2, 2.0 * c + 0.7])
              for c in range(6)]
    fp = build_fingerprint({c: np.tile(values[c], (120, 1)) for c in range(6)}, board)
    for c in range(6):
        post = posterior(np.tile(values[c], (10, 1)), fp)
        assert post.argmax == c


def test_argmax_matches_bruteforce_oracle(scenario, factory_fp, factory_silence):
    rng = np.random.default_rng(21)
    board = scenario.board
    h = board.cell_size / 2
    for _ in range(15):
        x = rng.uniform(h, board.width - h)
        y = rng.uniform(h, board.height - h)
        xy = np.repeat([[x, y]], 20, axis=0)
        w = fields_at_positions(board, scenario.env, scenario.magnet, xy, rng)
        w = w - factory_silence.mean
        assert posterior(w, factory_fp).argmax == fast_naive_argmax(w, factory_fp)


def test_empty_axes_rejected(factory_fp):
    with pytest.raises(DomainError):
        posterior(np.zeros((5, 3)), factory_fp, axes=())


def test_probabilities_normalized(factory_fp, factory_silence, scenario):
    rng = np.random.default_rng(22)
    w = fields_at_positions(scenario.board, scenario.env, scenario.magnet,
                            np.repeat([[9.0, 9.0]], 20, axis=0), rng) - factory_silence.mean
    post = posterior(w, factory_fp)
    assert post.probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(post.probs >= 0)


def test_ranking_breaks_ties_by_cell_id():
    board = BoardSpec(rows=1, cols=4, cell_size=2.0)
    same = np.tile([3.5, 3.5, 3.5], (120, 1))
    fp = build_fingerprint({c: same.copy() for c in range(4)}, board)
    post = posterior(np.tile([3.5, 3.5, 3.5], (5, 1)), fp)
    assert list(post.ranking) == [0, 1, 2, 3]


def test_k1_returns_argmax_centroid(scenario, factory_fp, factory_silence):
    rng = np.random.default_rng(23)
    cell = 57
    xy = np.repeat([scenario.board.centroid(cell)], 20, axis=0)
    w = fields_at_positions(scenario.board, scenario.env, scenario.magnet, xy, rng)
    est = estimate_key_cell(w - factory_silence.mean, factory_fp, top_k=1)
    assert est.mode == "discrete"
    assert np.allclose(est.pos, scenario.board.centroid(est.cell))
    assert est.top_k == 1 and est.window_len == 20


def test_equal_posterior_pair_gives_midpoint():
    board = BoardSpec(rows=1, cols=2, cell_size=2.0)
    same = np.tile([4.5, -2.5, 7.5], (120, 1))
    fp = build_fingerprint({0: same.copy(), 1: same.copy()}, board)
    est = estimate_key_cell(np.tile([4.5, -2.5, 7.5], (10, 1)), fp, top_k=2)
    assert est.mode == "continuous"
    mid = (board.centroid(0) + board.centroid(1)) / 2
    assert np.allclose(est.pos, mid)
    assert [p for _, p in est.top] == pytest.approx([0.5, 0.5])


def test_topk_bounds(factory_fp):
    w = np.zeros((5, 3))
    with pytest.raises(DomainError):
        estimate_key_cell(w, factory_fp, top_k=0)
    with pytest.raises(DomainError):
        estimate_key_cell(w, factory_fp, top_k=factory_fp.n_cells + 1)


def test_continuous_position_within_topk_hull(scenario, factory_fp, factory_silence):
    rng = np.random.default_rng(24)
    xy = np.repeat([[11.3, 7.7]], 20, axis=0)
    w = fields_at_positions(scenario.board, scenario.env, scenario.magnet, xy, rng)
    est = estimate_key_cell(w - factory_silence.mean, factory_fp, top_k=3)
    cents = scenario.board.centroids()[[c for c, _ in est.top]]
    assert cents[:, 0].min() - 1e-9 <= est.pos[0] <= cents[:, 0].max() + 1e-9
    assert cents[:, 1].min() - 1e-9 <= est.pos[1] <= cents[:, 1].max() + 1e-9


def test_axis_subset_consistency(scenario, factory_fp, factory_silence):
    rng = np.random.default_rng(25)
    xy = np.repeat([[20.0, 10.0]], 20, axis=0)
    w = fields_at_positions(scenario.board, scenario.env, scenario.magnet, xy, rng)
    w = w - factory_silence.mean
    full = posterior(w, factory_fp, axes=("x", "y", "z"))
    xy_only = posterior(w, factory_fp, axes=("x", "y"))
    z_only = posterior(w, factory_fp, axes=("z",))
    assert np.allclose(xy_only.log_scores + z_only.log_scores, full.log_scores)


def test_argmax_invariant_under_monotone_transform(scenario, factory_fp, factory_silence):
    rng = np.random.default_rng(26)
    xy = np.repeat([[30.0, 3.0]], 20, axis=0)
    w = fields_at_positions(scenario.board, scenario.env, scenario.magnet, xy, rng)
    post = posterior(w - factory_silence.mean, factory_fp)
    transformed = 3.0 * post.log_scores + 11.0
    order = np.lexsort((np.arange(transformed.size), -transformed))
    assert order[0] == post.argmax
