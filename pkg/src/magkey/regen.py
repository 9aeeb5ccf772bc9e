"""First-use fingerprint regeneration for a new device or magnet.

Readings from a different magnet or phone relate to the factory ones by a
per-axis linear map. Two anchor cells with well-separated factory means give
two equations per axis, enough to solve gain and offset exactly; the factory
fingerprint is then transported by mapping its bin edges and cell means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IllConditionedAnchorsError, InsufficientDataError
from .fingerprint import Fingerprint
from .trace import AXES, as_matrix

MIN_ANCHOR_SAMPLES = 50
MIN_AXIS_SEPARATION = 1.0  # uT between factory anchor means, per axis


@dataclass(frozen=True)
class AffineMap:
    """Per-axis ``observed = gain * factory + offset`` map."""

    gain: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=float).reshape(3).copy()
        b = np.asarray(self.offset, dtype=float).reshape(3).copy()
        if not (np.isfinite(g).all() and np.isfinite(b).all()):
            raise DomainError("affine map must be finite")
        if np.any(np.abs(g) <= 1e-6):
            raise DomainError("affine gains must exceed 1e-6 in magnitude")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gain", g)
        object.__setattr__(self, "offset", b)

    @staticmethod
    def identity() -> "AffineMap":
        return AffineMap(np.ones(3), np.zeros(3))

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """Map equal to applying ``inner`` first, then this map."""
        return AffineMap(self.gain * inner.gain, self.gain * inner.offset + self.offset)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.gain + self.offset

    def as_dict(self) -> dict:
        return {"a": [float(v) for v in self.gain], "b": [float(v) for v in self.offset]}

    @staticmethod
    def from_dict(d: dict) -> "AffineMap":
        return AffineMap(np.asarray(d["a"], dtype=float), np.asarray(d["b"], dtype=float))


def fit_affine(anchor_windows, fp: Fingerprint, method: str = "means") -> AffineMap:
    """Fit the factory-to-observed map from anchor-cell captures.

    ``anchor_windows`` is a sequence of ``(cell, offset-free samples)`` pairs;
    the default exact fit requires exactly two anchors whose factory means
    differ by at least 1 uT on every axis. ``method="lsq"`` accepts two or
    more anchors and regresses per-sample instead (robustness experiments).
    """
    anchors = [(int(cell), as_matrix(w)) for cell, w in anchor_windows]
    if len({c for c, _ in anchors}) != len(anchors):
        raise DomainError("anchor cells must be distinct")
    for cell, w in anchors:
        fp.board.check_cell(cell)
        if w.shape[0] < MIN_ANCHOR_SAMPLES:
            raise InsufficientDataError(
                f"anchor cell {cell}: need >= {MIN_ANCHOR_SAMPLES} samples, got {w.shape[0]}"
            )

    if method == "means":
        if len(anchors) != 2:
            raise DomainError("exact fit needs exactly two anchors")
        (c1, w1), (c2, w2) = anchors
        f1, f2 = fp.cell_mean(c1), fp.cell_mean(c2)
        o1, o2 = w1.mean(axis=0), w2.mean(axis=0)
        gain, offset = np.empty(3), np.empty(3)
        for axis in range(3):
            sep = abs(f2[axis] - f1[axis])
            if sep < MIN_AXIS_SEPARATION:
                raise IllConditionedAnchorsError(AXES[axis], sep, MIN_AXIS_SEPARATION)
            gain[axis] = (o2[axis] - o1[axis]) / (f2[axis] - f1[axis])
            offset[axis] = o1[axis] - gain[axis] * f1[axis]
        return AffineMap(gain, offset)

    if method == "lsq":
        if len(anchors) < 2:
            raise DomainError("least-squares fit needs at least two anchors")
        gain, offset = np.empty(3), np.empty(3)
        for axis in range(3):
            xs = np.concatenate([
                np.full(w.shape[0], fp.cell_mean(c)[axis]) for c, w in anchors
            ])
            ys = np.concatenate([w[:, axis] for _, w in anchors])
            if np.ptp(xs) < MIN_AXIS_SEPARATION:
                raise IllConditionedAnchorsError(AXES[axis], float(np.ptp(xs)), MIN_AXIS_SEPARATION)
            a, b = np.polyfit(xs, ys, 1)
            gain[axis], offset[axis] = a, b
        return AffineMap(gain, offset)

    raise DomainError(f"unknown fit method {method!r}")


def regenerate(fp: Fingerprint, amap: AffineMap, meta: dict | None = None) -> Fingerprint:
    """Transport a fingerprint through an affine map.

    Bin edges and cell means move through ``edge -> gain*edge + offset`` per
    axis; normalized counts are unchanged. Maps compose, so regenerating a
    regenerated fingerprint equals regenerating the original with the
    composition.
    """
    total = amap.compose(AffineMap(fp.axis_gain, fp.axis_offset))
    new_meta = dict(fp.meta)
    new_meta.update(meta or {})
    return fp.with_axis_map(total.gain, total.offset, new_meta)


def default_anchor_cells(fp: Fingerprint) -> tuple[int, int]:
    """Default anchor pair: most separated cells relative to their spread.

    Maximizes, over all cell pairs, the smallest per-axis ratio of mean
    separation to combined histogram spread. The fit's gain error per axis
    scales inversely with that ratio, so this keeps the two-point solve well
    conditioned on every axis. Ties break to the lexicographically smallest
    pair.
    """
    means = fp.cell_means()
    spread = fp.cell_spreads()
    n = means.shape[0]
    sep = np.abs(means[:, None, :] - means[None, :, :])
    noise = np.sqrt(spread[:, None, :] ** 2 + spread[None, :, :] ** 2) + 1e-9
    score = (sep / noise).min(axis=2)
    score[np.tril_indices(n)] = -1.0
    i, j = np.unravel_index(int(np.argmax(score)), score.shape)
    return int(i), int(j)
