"""Per-cell histogram fingerprints of offset-free magnetometer readings.

Each grid cell stores one histogram per sensor axis over fixed-width bins
aligned to multiples of ``bin_width`` (uT), plus the per-axis sample mean.
A per-axis gain/offset pair transports a fingerprint to a different magnet
or device: bin edges map through ``edge -> gain*edge + offset`` while the
normalized counts stay untouched, so likelihood lookups inverse-transform
the query value and reuse the base bins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .board import BoardSpec
from .errors import (
    DomainError,
    FormatError,
    IncompleteFingerprintError,
    InsufficientDataError,
)
from .trace import AXES, as_matrix

FP_VERSION = 1
MIN_CELL_SAMPLES = 100
EMPTY_BIN_MASS = 1e-6
LOG_EMPTY = float(np.log(EMPTY_BIN_MASS))


@dataclass(frozen=True)
class AxisHistogram:
    """Normalized histogram over bins ``[k*w, (k+1)*w)`` for k starting at ``offset``."""

    offset: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("histogram needs at least one bin")
        if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
            raise DomainError("histogram mass must be non-negative and sum to 1")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


class Fingerprint:
    """Immutable per-cell likelihood model P(reading | cell).

    ``hists[cell][axis]`` is an AxisHistogram in base (factory) space;
    ``axis_gain``/``axis_offset`` carry the current per-axis transport map
    (identity for a factory build). Use :func:`build_fingerprint` to create
    one and ``with_axis_map`` (via the regen module) to derive adapted copies.
    """

    def __init__(self, board: BoardSpec, bin_width: float, hists, base_means: np.ndarray,
                 axis_gain=None, axis_offset=None, meta: dict | None = None):
        if bin_width <= 0:
            raise DomainError("bin_width must be positive")
        if len(hists) != board.n_cells:
            raise IncompleteFingerprintError(
                f"expected {board.n_cells} cells, got {len(hists)}"
            )
        self.board = board
        self.bin_width = float(bin_width)
        self.hists = tuple(tuple(cell) for cell in hists)
        means = np.asarray(base_means, dtype=float).reshape(board.n_cells, 3).copy()
        means.setflags(write=False)
        self.base_means = means
        g = np.ones(3) if axis_gain is None else np.asarray(axis_gain, dtype=float).reshape(3)
        b = np.zeros(3) if axis_offset is None else np.asarray(axis_offset, dtype=float).reshape(3)
        if not np.isfinite(g).all() or np.any(np.abs(g) <= 1e-6):
            raise DomainError("axis gains must be finite and non-negligible")
        self.axis_gain = g.copy()
        self.axis_offset = b.copy()
        self.axis_gain.setflags(write=False)
        self.axis_offset.setflags(write=False)
        self.meta = dict(meta or {})
        self._dense: list | None = None  # lazy per-axis log-mass matrices

    # -- queries ---------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.board.n_cells

    def is_identity_map(self) -> bool:
        return bool(np.all(self.axis_gain == 1.0) and np.all(self.axis_offset == 0.0))

    def cell_mean(self, cell: int) -> np.ndarray:
        self.board.check_cell(cell)
        return self.axis_gain * self.base_means[cell] + self.axis_offset

    def cell_means(self) -> np.ndarray:
        return self.axis_gain[None, :] * self.base_means + self.axis_offset[None, :]

    def cell_spreads(self) -> np.ndarray:
        """(n_cells, 3) per-axis standard deviation of each stored histogram."""
        out = np.empty((self.n_cells, 3))
        for cell in range(self.n_cells):
            for axis in range(3):
                h = self.hists[cell][axis]
                centers = (np.arange(h.probs.size) + h.offset + 0.5) * self.bin_width
                mu = float(h.probs @ centers)
                out[cell, axis] = np.sqrt(max(float(h.probs @ (centers - mu) ** 2), 0.0))
        return out * np.abs(self.axis_gain)[None, :]

    def edges(self, cell: int, axis: int) -> np.ndarray:
        """Current-space bin edges for one cell/axis, ascending."""
        self.board.check_cell(cell)
        h = self.hists[cell][axis]
        base = (np.arange(h.probs.size + 1) + h.offset) * self.bin_width
        e = self.axis_gain[axis] * base + self.axis_offset[axis]
        return e if self.axis_gain[axis] > 0 else e[::-1]

    def probs(self, cell: int, axis: int) -> np.ndarray:
        """Bin masses matching :meth:`edges` order."""
        h = self.hists[cell][axis]
        return h.probs if self.axis_gain[axis] > 0 else h.probs[::-1]

    def _base_bins(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Global base-space bin index for current-space values."""
        v = (np.asarray(values, dtype=float) - self.axis_offset[axis]) / self.axis_gain[axis]
        return np.floor(v / self.bin_width).astype(np.int64)

    def log_mass(self, cell: int, axis: int, values) -> np.ndarray:
        """log P(value | cell) per value on one axis, floored at log(1e-6)."""
        h = self.hists[cell][axis]
        idx = self._base_bins(values, axis) - h.offset
        ok = (idx >= 0) & (idx < h.probs.size)
        mass = np.where(ok, h.probs[np.clip(idx, 0, h.probs.size - 1)], 0.0)
        return np.log(np.maximum(mass, EMPTY_BIN_MASS))

    def _dense_axis(self, axis: int):
        """(k_min, log-mass matrix (n_cells, span)) over the union of base bins."""
        if self._dense is None:
            self._dense = [None, None, None]
        if self._dense[axis] is None:
            offs = np.array([self.hists[c][axis].offset for c in range(self.n_cells)])
            sizes = np.array([self.hists[c][axis].probs.size for c in range(self.n_cells)])
            k_min = int(offs.min())
            span = int((offs + sizes).max()) - k_min
            mat = np.full((self.n_cells, span), LOG_EMPTY)
            for c in range(self.n_cells):
                h = self.hists[c][axis]
                lo = h.offset - k_min
                mat[c, lo:lo + h.probs.size] = np.log(np.maximum(h.probs, EMPTY_BIN_MASS))
            self._dense[axis] = (k_min, mat)
        return self._dense[axis]

    def prewarm(self) -> "Fingerprint":
        """Materialize the per-axis lookup matrices (useful before sharing
        across threads; queries themselves are read-only)."""
        for axis in range(3):
            self._dense_axis(axis)
        return self

    def log_likelihood_cells(self, window, axes=(0, 1, 2)) -> np.ndarray:
        """Summed log-likelihood of a window for every cell at once, shape (n_cells,)."""
        w = as_matrix(window)
        scores = np.zeros(self.n_cells)
        for axis in axes:
            k_min, mat = self._dense_axis(axis)
            k = self._base_bins(w[:, axis], axis) - k_min
            ok = (k >= 0) & (k < mat.shape[1])
            picked = mat[:, np.clip(k, 0, mat.shape[1] - 1)]
            scores += np.where(ok[None, :], picked, LOG_EMPTY).sum(axis=1)
        return scores

    def with_axis_map(self, gain, offset, meta: dict | None = None) -> "Fingerprint":
        fp = Fingerprint(self.board, self.bin_width, self.hists, self.base_means,
                         gain, offset, meta if meta is not None else self.meta)
        # base-space matrices do not depend on the map; share the cache holder
        if self._dense is None:
            self._dense = [None, None, None]
        fp._dense = self._dense
        return fp

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        cells = []
        for c in range(self.n_cells):
            entry = {}
            for axis, name in enumerate(AXES):
                h = self.hists[c][axis]
                entry[name] = {
                    "edges_offset": int(h.offset),
                    "counts": [float(v) for v in h.probs],
                }
            entry["mean"] = [float(v) for v in self.base_means[c]]
            cells.append(entry)
        d = {
            "fpv": FP_VERSION,
            "board": self.board.as_dict(),
            "bin_width": self.bin_width,
            "meta": self.meta,
            "cells": cells,
        }
        if not self.is_identity_map():
            d["axis_map"] = {
                "a": [float(v) for v in self.axis_gain],
                "b": [float(v) for v in self.axis_offset],
            }
        return d

    @staticmethod
    def from_dict(d: dict) -> "Fingerprint":
        if d.get("fpv") != FP_VERSION:
            raise FormatError(f"unsupported fingerprint version {d.get('fpv')!r}")
        board = BoardSpec.from_dict(d["board"])
        hists, means = [], []
        cells = d["cells"]
        if len(cells) != board.n_cells:
            raise FormatError(f"expected {board.n_cells} cells, file has {len(cells)}")
        for entry in cells:
            hists.append(tuple(
                AxisHistogram(int(entry[name]["edges_offset"]),
                              np.asarray(entry[name]["counts"], dtype=float))
                for name in AXES
            ))
            means.append(entry["mean"])
        amap = d.get("axis_map")
        gain = np.asarray(amap["a"], dtype=float) if amap else None
        off = np.asarray(amap["b"], dtype=float) if amap else None
        return Fingerprint(board, float(d["bin_width"]), hists, np.asarray(means),
                           gain, off, d.get("meta"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @staticmethod
    def load(path) -> "Fingerprint":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        return Fingerprint.from_dict(d)


def _axis_histogram(values: np.ndarray, bin_width: float) -> AxisHistogram:
    k = np.floor(values / bin_width).astype(np.int64)
    offset = int(k.min())
    counts = np.bincount(k - offset)
    return AxisHistogram(offset, counts / counts.sum())


def build_fingerprint(per_cell_traces, board: BoardSpec, bin_width: float = 1.0,
                      meta: dict | None = None) -> Fingerprint:
    """Build a factory fingerprint from offset-free training traces.

    ``per_cell_traces`` maps every cell id on the board to at least 100
    offset-free samples collected with the magnet resting in that cell.
    Deterministic: identical inputs serialize to identical bytes.
    """
    missing = [c for c in range(board.n_cells) if c not in per_cell_traces]
    if missing:
        raise IncompleteFingerprintError(
            f"missing traces for {len(missing)} cells (first: {missing[:5]})"
        )
    hists, means = [], []
    for cell in range(board.n_cells):
        b = as_matrix(per_cell_traces[cell])
        if b.shape[0] < MIN_CELL_SAMPLES:
            raise InsufficientDataError(
                f"cell {cell}: need >= {MIN_CELL_SAMPLES} samples, got {b.shape[0]}"
            )
        if not np.isfinite(b).all():
            raise DomainError(f"cell {cell}: non-finite samples")
        hists.append(tuple(_axis_histogram(b[:, axis], bin_width) for axis in range(3)))
        means.append(b.mean(axis=0))
    return Fingerprint(board, bin_width, hists, np.asarray(means), meta=meta)


def cell_log_likelihood(window, fp: Fingerprint, cell: int, axes=(0, 1, 2)) -> float:
    """Log-probability of a window of offset-free samples under one cell.

    Sum over the selected axes and all samples of the log histogram mass of
    the bin containing each reading; empty or out-of-range bins contribute
    log(1e-6), so the result is always finite.
    """
    w = as_matrix(window)
    if w.shape[0] == 0:
        raise DomainError("window must be non-empty")
    fp.board.check_cell(cell)
    total = 0.0
    for axis in axes:
        total += float(fp.log_mass(cell, axis, w[:, axis]).sum())
    return total


def axes_to_indices(axes) -> tuple[int, ...]:
    """Normalize an axes spec ('xy', ('x','z'), (0,2), ...) to sorted indices."""
    if axes is None:
        return (0, 1, 2)
    idx = []
    for a in axes:
        if isinstance(a, str):
            if a not in AXES:
                raise DomainError(f"unknown axis {a!r}")
            idx.append(AXES.index(a))
        else:
            if a not in (0, 1, 2):
                raise DomainError(f"axis index {a} outside 0..2")
            idx.append(int(a))
    if not idx:
        raise DomainError("axes must be non-empty")
    if len(set(idx)) != len(idx):
        raise DomainError("duplicate axes")
    return tuple(sorted(idx))
