"""Online belief map built from simulated lidar.

Lidar is perfect (no noise): the map can only be unknown where nothing has
been sensed, never wrong. All detection noise lives in perception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cogx import kernels
from cogx.world import EnvironmentSpec, Pose

UNKNOWN = kernels.UNKNOWN
FREE = kernels.FREE
OCCUPIED = kernels.OCCUPIED

_STATE_CHARS = {UNKNOWN: "?", FREE: ".", OCCUPIED: "#"}
_CHAR_STATES = {v: k for k, v in _STATE_CHARS.items()}


@dataclass
class LidarModel:
    ray_count: int = 360
    max_range: float = 8.0

    def __post_init__(self):
        if self.ray_count < 8:
            raise ValueError("lidar needs at least 8 rays")
        if self.max_range <= 0:
            raise ValueError("lidar max_range must be positive")


class OccupancyGrid:
    """Tri-state belief over the environment's cells."""

    def __init__(self, width: int, height: int, cell_size: float):
        self.width = width
        self.height = height
        self.cell_size = cell_size
        self.cells = np.zeros((height, width), dtype=np.uint8)

    @classmethod
    def for_env(cls, env: EnvironmentSpec) -> "OccupancyGrid":
        return cls(env.width, env.height, env.cell_size)

    def state(self, c: int, r: int) -> int:
        return int(self.cells[r, c])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.cell_size)), int(math.floor(y / self.cell_size))

    def cell_center(self, c: int, r: int) -> tuple[float, float]:
        return (c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.width, self.height, self.cell_size)
        g.cells = self.cells.copy()
        return g

    def to_text(self) -> str:
        """Portable dump, one char per cell (? . #), row 0 first."""
        rows = []
        for r in range(self.height):
            rows.append("".join(_STATE_CHARS[int(v)] for v in self.cells[r]))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str, cell_size: float = 0.25) -> "OccupancyGrid":
        lines = [ln for ln in text.splitlines() if ln]
        g = cls(len(lines[0]), len(lines), cell_size)
        for r, ln in enumerate(lines):
            for c, ch in enumerate(ln):
                g.cells[r, c] = _CHAR_STATES[ch]
        return g


def scan_directions(ray_count: int) -> np.ndarray:
    """Unit direction table for a full 360 degree sweep (world frame)."""
    dirs = np.empty((ray_count, 2), dtype=np.float64)
    for i in range(ray_count):
        a = 2.0 * math.pi * i / ray_count
        dirs[i, 0] = math.cos(a)
        dirs[i, 1] = math.sin(a)
    return dirs


def integrate_scan(grid: OccupancyGrid, env: EnvironmentSpec, pose: Pose,
                   lidar: LidarModel, _dirs_cache: dict = {}) -> OccupancyGrid:
    """Sweep the lidar once from pose and fold the returns into the grid."""
    dirs = _dirs_cache.get(lidar.ray_count)
    if dirs is None:
        dirs = scan_directions(lidar.ray_count)
        _dirs_cache[lidar.ray_count] = dirs
    kernels.integrate_scan(
        grid.cells, env.blocking, env.cell_size, pose.x, pose.y, dirs, lidar.max_range
    )
    return grid


def frontier_cells(grid: OccupancyGrid) -> set[tuple[int, int]]:
    """FREE cells 4-adjacent to UNKNOWN."""
    arr = kernels.frontier_cells(grid.cells)
    return {(int(c), int(r)) for c, r in arr}


def frontier_cells_ordered(grid: OccupancyGrid) -> list[tuple[int, int]]:
    """Row-major frontier list; clustering relies on this ordering."""
    arr = kernels.frontier_cells(grid.cells)
    return [(int(c), int(r)) for c, r in arr]


def coverage(grid: OccupancyGrid, env: EnvironmentSpec) -> float:
    """Fraction of the environment's free cells currently known FREE."""
    free_truth = int((env.blocking == 0).sum())
    if free_truth == 0:
        return 0.0
    known_free = int(((grid.cells == FREE) & (env.blocking == 0)).sum())
    return known_free / free_truth
