"""Application key layouts: groups of fine-grained cells mapped to keys.

A layout groups grid cells into named keys (cell sets are arbitrary, not
necessarily rectangular) and optionally names a reference key used for the
polarity bootstrap click. Layout files are JSON with version tag ``klv``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .board import GridShape
from .errors import DomainError, FormatError
from .estimate import Estimate

KL_VERSION = 1


@dataclass(frozen=True)
class Key:
    id: str
    label: str
    cells: frozenset

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset(int(c) for c in self.cells))


@dataclass(frozen=True)
class KeyLayout:
    layout_id: str
    grid: GridShape
    keys: tuple
    reference_key: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))

    @property
    def cell_to_key(self) -> dict:
        mapping = {}
        for key in self.keys:
            for cell in key.cells:
                mapping[cell] = key
        return mapping

    def key_by_id(self, key_id: str) -> Key | None:
        for key in self.keys:
            if key.id == key_id:
                return key
        return None

    def to_dict(self) -> dict:
        return {
            "klv": KL_VERSION,
            "id": self.layout_id,
            "board": {
                "rows": self.grid.rows,
                "cols": self.grid.cols,
                "cell_size": self.grid.cell_size,
            },
            "keys": [
                {"id": k.id, "label": k.label, "cells": sorted(k.cells)}
                for k in self.keys
            ],
            "reference_key": self.reference_key,
        }

    @staticmethod
    def from_dict(d: dict) -> "KeyLayout":
        if d.get("klv") != KL_VERSION:
            raise FormatError(f"unsupported layout version {d.get('klv')!r}")
        try:
            grid = GridShape(int(d["board"]["rows"]), int(d["board"]["cols"]),
                             float(d["board"]["cell_size"]))
            keys = tuple(
                Key(str(k["id"]), str(k["label"]), frozenset(int(c) for c in k["cells"]))
                for k in d["keys"]
            )
            return KeyLayout(str(d["id"]), grid, keys, d.get("reference_key"))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed layout: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @staticmethod
    def load(path) -> "KeyLayout":
        try:
            return KeyLayout.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc


@dataclass(frozen=True)
class KeyEvent:
    """A resolved application keystroke."""

    key: str
    label: str
    t_start: float
    t_end: float
    estimate: Estimate | None = None


@dataclass(frozen=True)
class Violation:
    kind: str    # overlap | out_of_board | empty_key | missing_reference | duplicate_key_id
    message: str
    key: str | None = None
    cell: int | None = None


def validate_layout(layout: KeyLayout) -> list[Violation]:
    """Diagnostic check; an empty list means the layout is usable."""
    out: list[Violation] = []
    seen_ids = set()
    owner: dict[int, str] = {}
    n_cells = layout.grid.n_cells
    for key in layout.keys:
        if key.id in seen_ids:
            out.append(Violation("duplicate_key_id", f"key id {key.id!r} appears twice", key.id))
        seen_ids.add(key.id)
        if not key.cells:
            out.append(Violation("empty_key", f"key {key.id!r} has no cells", key.id))
        for cell in sorted(key.cells):
            if not 0 <= cell < n_cells:
                out.append(Violation(
                    "out_of_board", f"key {key.id!r} cell {cell} outside 0..{n_cells - 1}",
                    key.id, cell))
            elif cell in owner:
                out.append(Violation(
                    "overlap", f"cell {cell} belongs to keys {owner[cell]!r} and {key.id!r}",
                    key.id, cell))
            else:
                owner[cell] = key.id
    if layout.reference_key is None:
        out.append(Violation("missing_reference", "layout has no reference key"))
    elif layout.reference_key not in seen_ids:
        out.append(Violation(
            "missing_reference", f"reference key {layout.reference_key!r} not in layout"))
    return out


def map_key(est: Estimate, layout: KeyLayout, span: tuple[float, float] = (0.0, 0.0)) -> KeyEvent | None:
    """Map an estimate to the application key owning its cell, or None.

    Discrete estimates use the argmax cell; continuous estimates first snap
    the position to its containing cell. The estimate's grid must match the
    layout's.
    """
    if est.grid != layout.grid:
        raise DomainError(f"estimate grid {est.grid} does not match layout grid {layout.grid}")
    if est.mode == "discrete":
        cell = est.cell
    else:
        size = layout.grid.cell_size
        col = min(int(est.pos[0] // size), layout.grid.cols - 1)
        row = min(int(est.pos[1] // size), layout.grid.rows - 1)
        if not (0 <= est.pos[0] <= layout.grid.cols * size
                and 0 <= est.pos[1] <= layout.grid.rows * size):
            return None
        cell = row * layout.grid.cols + col
    key = layout.cell_to_key.get(cell)
    if key is None:
        return None
    return KeyEvent(key.id, key.label, span[0], span[1], est)


def calculator_layout(grid: GridShape, origin_col: int = 0, origin_row: int = 0,
                      slot_cells: int = 2, layout_id: str = "calculator") -> KeyLayout:
    """Built-in 16-key calculator layout.

    Keys sit on a 5x4 slot grid of ``slot_cells`` x ``slot_cells`` cell
    blocks; '=' spans two slots (8 cells at the default size) and '0' one
    (4 cells). Three slots stay unmapped. 'C' is the reference key.
    """
    slot_rows, slot_cols = 4, 5
    need_cols = origin_col + slot_cols * slot_cells
    need_rows = origin_row + slot_rows * slot_cells
    if need_cols > grid.cols or need_rows > grid.rows:
        raise DomainError(
            f"calculator needs {need_rows}x{need_cols} cells from origin, "
            f"grid is {grid.rows}x{grid.cols}"
        )

    def slot(r: int, c: int) -> list[int]:
        cells = []
        for dr in range(slot_cells):
            for dc in range(slot_cells):
                row = origin_row + r * slot_cells + dr
                col = origin_col + c * slot_cells + dc
                cells.append(row * grid.cols + col)
        return cells

    labels = {
        (0, 0): "7", (0, 1): "8", (0, 2): "9", (0, 3): "/", (0, 4): "C",
        (1, 0): "4", (1, 1): "5", (1, 2): "6", (1, 3): "*",
        (2, 0): "1", (2, 1): "2", (2, 2): "3", (2, 3): "-", (2, 4): "+",
        (3, 0): "0",
    }
    keys = [Key(lbl, lbl, frozenset(slot(r, c))) for (r, c), lbl in sorted(labels.items())]
    keys.append(Key("=", "=", frozenset(slot(3, 1) + slot(3, 2))))
    return KeyLayout(layout_id, grid, tuple(keys), reference_key="C")


def key_center(layout: KeyLayout, key: Key) -> np.ndarray:
    """Board-cm center of a key: mean of its cells' centroids."""
    size = layout.grid.cell_size
    pts = []
    for cell in sorted(key.cells):
        row, col = divmod(cell, layout.grid.cols)
        pts.append([col * size + size / 2, row * size + size / 2])
    return np.asarray(pts).mean(axis=0)
