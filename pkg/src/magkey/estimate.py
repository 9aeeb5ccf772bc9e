"""Bayesian keystroke-to-cell resolution over a fingerprint.

With a uniform prior over cells, the posterior of a window of offset-free
samples is the normalized per-cell likelihood; the discrete estimate is the
argmax cell, and the continuous estimate fuses the top-k cell centroids
weighted by their posterior mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .board import GridShape
from .errors import DomainError
from .fingerprint import Fingerprint, axes_to_indices
from .trace import as_matrix


@dataclass(frozen=True)
class Posterior:
    """Per-cell log-scores, normalized probabilities, and descending ranking.

    Ties in the ranking break toward the lower cell id so replays are
    deterministic.
    """

    log_scores: np.ndarray
    probs: np.ndarray
    ranking: np.ndarray

    @property
    def argmax(self) -> int:
        return int(self.ranking[0])


@dataclass(frozen=True)
class Estimate:
    """Resolved keystroke: argmax cell plus a discrete or continuous position."""

    mode: str                      # "discrete" | "continuous"
    cell: int
    pos: np.ndarray                # (x, y) board cm
    top: tuple                     # ((cell, prob), ...) for the k fused cells
    top_k: int
    window_len: int
    grid: GridShape


def posterior(window, fp: Fingerprint, axes=None) -> Posterior:
    """Posterior over cells for a window of offset-free samples.

    Log-scores sum per-sample, per-axis log histogram masses; probabilities
    are the max-shifted softmax of the scores (uniform prior).
    """
    w = as_matrix(window)
    if w.shape[0] < 1:
        raise DomainError("window must contain at least one sample")
    idx = axes_to_indices(axes)
    scores = fp.log_likelihood_cells(w, idx)
    shifted = np.exp(scores - scores.max())
    probs = shifted / shifted.sum()
    ranking = np.lexsort((np.arange(scores.size), -scores))
    return Posterior(scores, probs, ranking)


def estimate_key_cell(window, fp: Fingerprint, top_k: int = 1, axes=None) -> Estimate:
    """Resolve a keystroke window to a cell (top_k=1) or continuous position.

    For top_k > 1 the estimate is the probability-weighted mean of the top-k
    cell centroids, which need not coincide with any centroid.
    """
    if not 1 <= top_k <= fp.n_cells:
        raise DomainError(f"top_k {top_k} outside 1..{fp.n_cells}")
    w = as_matrix(window)
    post = posterior(w, fp, axes)
    best = post.argmax
    if top_k == 1:
        return Estimate("discrete", best, fp.board.centroid(best),
                        ((best, float(post.probs[best])),), 1, w.shape[0],
                        fp.board.shape)
    cells = post.ranking[:top_k]
    weights = post.probs[cells]
    weights = weights / weights.sum()
    pos = (fp.board.centroids()[cells] * weights[:, None]).sum(axis=0)
    top = tuple((int(c), float(p)) for c, p in zip(cells, weights))
    return Estimate("continuous", best, pos, top, top_k, w.shape[0], fp.board.shape)
