"""Small geometric primitives: axis-aligned rectangles and terrain models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in ground coordinates (meters)."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax >= self.xmin and self.ymax >= self.ymin):
            raise ValidationError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, x, y) -> np.ndarray | bool:
        """Half-open membership test: [xmin, xmax) x [ymin, ymax)."""
        return (x >= self.xmin) & (x < self.xmax) & (y >= self.ymin) & (y < self.ymax)

    def contains_closed(self, x, y):
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    @staticmethod
    def around(points_xy: np.ndarray) -> "Rect":
        pts = np.asarray(points_xy, dtype=np.float64)
        if pts.size == 0:
            return Rect(0.0, 0.0, 0.0, 0.0)
        return Rect(
            float(pts[:, 0].min()),
            float(pts[:, 1].min()),
            float(pts[:, 0].max()),
            float(pts[:, 1].max()),
        )


class FlatTerrain:
    """Default terrain: the plane z = elevation (0 by default)."""

    def __init__(self, elevation: float = 0.0):
        self.elevation = float(elevation)

    def height_at(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(np.float64(self.elevation), x.shape).copy() if x.shape else float(self.elevation)

    @property
    def zmin(self) -> float:
        return self.elevation

    @property
    def zmax(self) -> float:
        return self.elevation


class Heightfield:
    """Regular-grid terrain sampled with bilinear interpolation.

    `grid[i, j]` is the elevation at (origin_x + i*cell, origin_y + j*cell).
    Queries outside the grid clamp to the border.
    """

    def __init__(self, origin: tuple[float, float], cell: float, grid: np.ndarray):
        if cell <= 0:
            raise ValidationError("heightfield cell size must be positive")
        self.origin = (float(origin[0]), float(origin[1]))
        self.cell = float(cell)
        self.grid = np.asarray(grid, dtype=np.float64)
        if self.grid.ndim != 2 or min(self.grid.shape) < 2:
            raise ValidationError("heightfield grid must be 2-D with at least 2x2 samples")

    def height_at(self, x, y):
        scalar = np.isscalar(x) and np.isscalar(y)
        fx = (np.asarray(x, dtype=np.float64) - self.origin[0]) / self.cell
        fy = (np.asarray(y, dtype=np.float64) - self.origin[1]) / self.cell
        nx, ny = self.grid.shape
        fx = np.clip(fx, 0.0, nx - 1.0)
        fy = np.clip(fy, 0.0, ny - 1.0)
        i0 = np.minimum(fx.astype(np.int64), nx - 2)
        j0 = np.minimum(fy.astype(np.int64), ny - 2)
        tx = fx - i0
        ty = fy - j0
        g = self.grid
        h = (
            g[i0, j0] * (1 - tx) * (1 - ty)
            + g[i0 + 1, j0] * tx * (1 - ty)
            + g[i0, j0 + 1] * (1 - tx) * ty
            + g[i0 + 1, j0 + 1] * tx * ty
        )
        return float(h) if scalar else h

    @property
    def zmin(self) -> float:
        return float(self.grid.min())

    @property
    def zmax(self) -> float:
        return float(self.grid.max())


def yaw_matrix(yaw: float) -> np.ndarray:
    """Rotation about +z by `yaw` radians (counter-clockwise from +x)."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
