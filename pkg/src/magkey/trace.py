"""Timestamped 3-axis magnetometer streams and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class MagSample:
    """One magnetometer reading: time in seconds, field vector in uT."""

    t: float
    b: np.ndarray


class Trace:
    """A sequence of MagSample backed by arrays.

    ``t`` has shape (n,), non-decreasing; ``b`` has shape (n, 3) in uT.
    Indexing yields MagSample; slicing yields a new Trace.
    """

    __slots__ = ("t", "b")

    def __init__(self, t: np.ndarray, b: np.ndarray):
        t = np.asarray(t, dtype=float)
        b = np.asarray(b, dtype=float)
        if t.ndim != 1 or b.ndim != 2 or b.shape != (t.shape[0], 3):
            raise DomainError(f"trace shape mismatch: t{t.shape} b{b.shape}")
        if not (np.isfinite(t).all() and np.isfinite(b).all()):
            raise DomainError("trace contains non-finite values")
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise DomainError("timestamps must be non-decreasing")
        self.t = t
        self.b = b

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Trace(self.t[idx], self.b[idx])
        return MagSample(float(self.t[idx]), self.b[idx].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return np.array_equal(self.t, other.t) and np.array_equal(self.b, other.b)

    def __repr__(self) -> str:
        return f"Trace(n={len(self)}, t=[{self.t[0] if len(self) else 0:.3f}..])"


def as_matrix(samples) -> np.ndarray:
    """Coerce a Trace, (n,3) array, or iterable of MagSample to an (n,3) array."""
    if isinstance(samples, Trace):
        return samples.b
    if isinstance(samples, np.ndarray):
        if samples.ndim == 1 and samples.shape[0] == 3:
            return samples.reshape(1, 3)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise DomainError(f"expected (n,3) samples, got shape {samples.shape}")
        return samples
    rows = [s.b if isinstance(s, MagSample) else np.asarray(s, dtype=float) for s in samples]
    return as_matrix(np.asarray(rows, dtype=float))


def write_trace_csv(trace: Trace, path) -> None:
    """Write a trace as ``t,bx,by,bz`` rows (seconds and uT)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "bx", "by", "bz"])
        for i in range(len(trace)):
            w.writerow([repr(float(trace.t[i]))] + [repr(float(v)) for v in trace.b[i]])


def read_trace_csv(path) -> Trace:
    """Read a ``t,bx,by,bz`` CSV written by :func:`write_trace_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "bx", "by", "bz"]:
            raise FormatError(f"{path}: expected header t,bx,by,bz")
        t, b = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 columns")
            try:
                t.append(float(row[0]))
                b.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not t:
        raise FormatError(f"{path}: no samples")
    return Trace(np.asarray(t), np.asarray(b))
