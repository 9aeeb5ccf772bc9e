"""Silence-period offset removal and magnet polarity handling.

A "silence" capture (magnet absent) estimates the combined Earth plus
background field; subtracting its mean leaves only the magnet's rotated
field plus sensor noise in every later reading. Polarity inversion of the
magnet negates that field globally, and is detected against a stored
fingerprint at one known reference cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousPolarityError, DomainError, InsufficientDataError
from .trace import Trace, as_matrix

MIN_SILENCE_SAMPLES = 50
MIN_POLARITY_SAMPLES = 5
POLARITY_COSINE_FLOOR = 0.2


@dataclass(frozen=True)
class SilenceStats:
    """Per-axis mean and variance of a magnet-absent capture."""

    mean: np.ndarray
    var: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3).copy()
        var = np.asarray(self.var, dtype=float).reshape(3).copy()
        if self.n_samples < MIN_SILENCE_SAMPLES:
            raise InsufficientDataError(
                f"silence stats need >= {MIN_SILENCE_SAMPLES} samples, got {self.n_samples}"
            )
        if np.any(var < 0) or not (np.isfinite(mean).all() and np.isfinite(var).all()):
            raise DomainError("silence stats must be finite with non-negative variance")
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    def as_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "var": [float(v) for v in self.var],
            "n": self.n_samples,
        }

    @staticmethod
    def from_dict(d: dict) -> "SilenceStats":
        return SilenceStats(np.asarray(d["mean"]), np.asarray(d["var"]), int(d["n"]))


class Polarity(enum.Enum):
    NORMAL = "normal"
    FLIPPED = "flipped"


def estimate_silence(trace) -> SilenceStats:
    """Per-axis mean/variance over a magnet-absent trace (>= 50 samples)."""
    b = as_matrix(trace)
    if b.shape[0] < MIN_SILENCE_SAMPLES:
        raise InsufficientDataError(
            f"silence estimation needs >= {MIN_SILENCE_SAMPLES} samples, got {b.shape[0]}"
        )
    return SilenceStats(b.mean(axis=0), b.var(axis=0), b.shape[0])


def remove_silence(trace, stats: SilenceStats):
    """Subtract the silence mean from every sample; timestamps are preserved."""
    if isinstance(trace, Trace):
        return Trace(trace.t, trace.b - stats.mean[None, :])
    return as_matrix(trace) - stats.mean[None, :]


def apply_polarity(samples, polarity: Polarity):
    """Negate all three axes when polarity is FLIPPED; otherwise pass through."""
    if polarity is Polarity.NORMAL:
        return samples
    if isinstance(samples, Trace):
        return Trace(samples.t, -samples.b)
    return -as_matrix(samples)


def detect_polarity(ref_window, fp, ref_cell: int) -> Polarity:
    """Decide magnet polarity from offset-free readings at one known cell.

    Compares the window mean against the fingerprint's stored mean for
    ``ref_cell``: an aligned field means NORMAL, an inverted one FLIPPED.
    Near-orthogonal windows (|cosine| < 0.2) are rejected rather than guessed.
    """
    w = as_matrix(ref_window)
    if w.shape[0] < MIN_POLARITY_SAMPLES:
        raise InsufficientDataError(
            f"polarity check needs >= {MIN_POLARITY_SAMPLES} samples, got {w.shape[0]}"
        )
    fp.board.check_cell(ref_cell)
    observed = w.mean(axis=0)
    stored = fp.cell_mean(ref_cell)
    denom = np.linalg.norm(observed) * np.linalg.norm(stored)
    if denom == 0.0:
        raise AmbiguousPolarityError("zero-magnitude reference window or cell mean")
    cosine = float(np.dot(observed, stored) / denom)
    if abs(cosine) < POLARITY_COSINE_FLOOR:
        raise AmbiguousPolarityError(
            f"reference-cell cosine {cosine:.3f} inside +/-{POLARITY_COSINE_FLOOR} dead zone"
        )
    return Polarity.NORMAL if cosine > 0 else Polarity.FLIPPED
