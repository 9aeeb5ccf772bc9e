"""Keystroke segmentation: moving vs. stationary via windowed variance.

The statistic at sample t is the sum over axes of the unbiased variance of
the last ``window`` samples. Low variance means the magnet is resting on a
key; motion between keys shows up as a variance burst. Maximal stationary
runs at least ``min_dwell`` samples long become keystrokes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .trace import as_matrix


@dataclass(frozen=True)
class SegmenterConfig:
    """Threshold (uT^2), variance window (samples), minimum dwell (samples)."""

    var_threshold: float = 10.0
    window: int = 5
    min_dwell: int = 20

    def __post_init__(self):
        if self.var_threshold <= 0:
            raise DomainError("var_threshold must be positive")
        if self.window < 2:
            raise DomainError("window must be >= 2")
        if self.min_dwell < 1:
            raise DomainError("min_dwell must be >= 1")


@dataclass(frozen=True)
class Keystroke:
    """One stationary dwell: inclusive sample span plus its offset-free readings."""

    start: int
    end: int
    samples: np.ndarray

    def __len__(self) -> int:
        return self.end - self.start + 1


def window_variance(samples, window: int) -> np.ndarray:
    """Sliding-window statistic aligned to window end indices.

    Returns an array of length ``n - window + 1``; element i is the summed
    per-axis sample variance of samples ``i .. i+window-1``, i.e. the value
    at trace index ``i + window - 1``.
    """
    b = as_matrix(samples)
    if b.shape[0] < window:
        raise DomainError(f"trace length {b.shape[0]} shorter than window {window}")
    view = np.lib.stride_tricks.sliding_window_view(b, window, axis=0)
    return view.var(axis=2, ddof=1).sum(axis=1)


def segment_stream(samples, cfg: SegmenterConfig = SegmenterConfig()) -> list[Keystroke]:
    """Split an offset-free stream into keystrokes.

    A sample index t >= window-1 is stationary iff the variance statistic of
    the window ending at t is <= var_threshold. Maximal stationary runs of at
    least ``min_dwell`` samples are emitted in order; consecutive keystrokes
    are always separated by at least one moving sample.
    """
    b = as_matrix(samples)
    v = window_variance(b, cfg.window)
    stationary = v <= cfg.var_threshold
    strokes: list[Keystroke] = []
    run_start = None
    for i, flag in enumerate(np.append(stationary, False)):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            start = run_start + cfg.window - 1
            end = i - 1 + cfg.window - 1
            if end - start + 1 >= cfg.min_dwell:
                strokes.append(Keystroke(start, end, b[start:end + 1]))
            run_start = None
    return strokes
