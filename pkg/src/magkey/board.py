"""Virtual grid geometry: cell indexing, centroids, sensor placement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class GridShape:
    """Grid geometry shared between fingerprints and key layouts."""

    rows: int
    cols: int
    cell_size: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError("grid needs at least one cell")
        if self.cell_size <= 0:
            raise DomainError("cell_size must be positive")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols


DEFAULT_SENSOR_DEPTH_CM = -7.0


@dataclass(frozen=True)
class BoardSpec:
    """Physical board: a rows x cols grid of square cells plus the sensor pose.

    Cells are indexed row-major: ``cell = row * cols + col``. The centroid of
    cell (row, col) is ``(col*cell_size + cell_size/2, row*cell_size + cell_size/2, 0)``
    in board-frame cm. The magnet rests ``magnet_height`` cm above the board
    plane; the magnetometer sits at ``sensor_pos`` (board-frame cm). When
    ``sensor_pos`` is omitted it defaults to 7 cm beneath the board center,
    which keeps the near/far field ratio moderate across the whole grid.
    """

    rows: int
    cols: int
    cell_size: float = 2.0
    sensor_pos: np.ndarray | None = None
    magnet_height: float = 0.5

    def __post_init__(self):
        if self.rows * self.cols < 1:
            raise DomainError("board needs at least one cell")
        if self.cell_size <= 0:
            raise DomainError("cell_size must be positive")
        if self.sensor_pos is None:
            pos = np.array([self.cols * self.cell_size / 2,
                            self.rows * self.cell_size / 2,
                            DEFAULT_SENSOR_DEPTH_CM])
        else:
            pos = np.asarray(self.sensor_pos, dtype=float).reshape(3).copy()
        pos.setflags(write=False)
        object.__setattr__(self, "sensor_pos", pos)

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def width(self) -> float:
        return self.cols * self.cell_size

    @property
    def height(self) -> float:
        return self.rows * self.cell_size

    @property
    def shape(self) -> GridShape:
        return GridShape(self.rows, self.cols, self.cell_size)

    def check_cell(self, cell: int) -> int:
        if not 0 <= cell < self.n_cells:
            raise DomainError(f"cell {cell} outside 0..{self.n_cells - 1}")
        return cell

    def cell_rc(self, cell: int) -> tuple[int, int]:
        self.check_cell(cell)
        return cell // self.cols, cell % self.cols

    def centroid(self, cell: int) -> np.ndarray:
        """(x, y) centroid of a cell in board-frame cm."""
        row, col = self.cell_rc(cell)
        h = self.cell_size / 2.0
        return np.array([col * self.cell_size + h, row * self.cell_size + h])

    def centroids(self) -> np.ndarray:
        """(n_cells, 2) array of all centroids, row-major cell order."""
        cols = np.arange(self.n_cells) % self.cols
        rows = np.arange(self.n_cells) // self.cols
        h = self.cell_size / 2.0
        return np.stack([cols * self.cell_size + h, rows * self.cell_size + h], axis=1)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def cell_at(self, x: float, y: float) -> int | None:
        """Cell whose square contains (x, y); max edges belong to the last cell."""
        if not self.contains(x, y):
            return None
        col = min(int(x // self.cell_size), self.cols - 1)
        row = min(int(y // self.cell_size), self.rows - 1)
        return row * self.cols + col

    def magnet_pos3(self, xy) -> np.ndarray:
        """3D magnet position for a board position (x, y)."""
        x, y = float(xy[0]), float(xy[1])
        return np.array([x, y, self.magnet_height])

    def as_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "cell_size": self.cell_size,
            "sensor_pos": [float(v) for v in self.sensor_pos],
            "magnet_height": self.magnet_height,
        }

    @staticmethod
    def from_dict(d: dict) -> "BoardSpec":
        pos = d.get("sensor_pos")
        return BoardSpec(
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            cell_size=float(d.get("cell_size", 2.0)),
            sensor_pos=None if pos is None else np.asarray(pos, dtype=float),
            magnet_height=float(d.get("magnet_height", 0.5)),
        )
