"""
Urban environment model for the UAV network simulator.

This module generates the rasterized building map and decides whether a
UAV-to-user link has line of sight by walking the ground projection of the
link across the grid lines it crosses.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class Point3(NamedTuple):
    """A point in the simulation frame, meters."""

    x: float
    y: float
    z: float = 0.0


class Crossing(NamedTuple):
    """A grid-line crossing of a link's ground projection."""

    t: float
    x: float
    y: float
    z: float


class CityConfig(BaseModel):
    """Building statistics for the generated city."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    cell_size: float = Field(default=10.0, gt=0, description="Grid cell edge, m")
    density: float = Field(
        default=0.25, ge=0.0, le=1.0, description="Probability a cell holds a building"
    )
    min_height: float = Field(default=10.0, ge=0.0, description="Lowest building, m")
    max_height: float = Field(default=60.0, ge=0.0, description="Tallest building, m")
    grid_file: Optional[Path] = Field(
        default=None, description="Replay a saved grid instead of generating one"
    )

    @model_validator(mode="after")
    def _check_height_range(self) -> "CityConfig":
        if self.min_height > self.max_height:
            raise ValueError(
                f"min_height {self.min_height} exceeds max_height {self.max_height}"
            )
        return self


@dataclass(frozen=True, eq=False)
class BuildingGrid:
    """Per-cell building heights over a rectangular region.

    ``heights[row, col]`` covers ``[col*c, (col+1)*c) x [row*c, (row+1)*c)``.
    """

    region_width: float
    region_height: float
    cell_size: float
    heights: np.ndarray

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.region_width <= 0 or self.region_height <= 0:
            raise ValueError("region dimensions must be positive")
        expected = (
            math.ceil(self.region_height / self.cell_size),
            math.ceil(self.region_width / self.cell_size),
        )
        heights = np.array(self.heights, dtype=float)
        if heights.shape != expected:
            raise ValueError(
                f"heights shape {heights.shape} does not match grid {expected}"
            )
        if np.any(heights < 0):
            raise ValueError("building heights must be non-negative")
        heights.setflags(write=False)
        object.__setattr__(self, "heights", heights)

    @property
    def rows(self) -> int:
        return int(self.heights.shape[0])

    @property
    def cols(self) -> int:
        return int(self.heights.shape[1])

    def contains(self, x: float, y: float) -> bool:
        """Return True if the ground position lies inside the region."""
        return 0.0 <= x <= self.region_width and 0.0 <= y <= self.region_height

    def with_heights(self, heights: np.ndarray) -> "BuildingGrid":
        """Copy of this grid with different building heights."""
        return BuildingGrid(
            self.region_width, self.region_height, self.cell_size, heights
        )


def generate_city(
    city: CityConfig,
    region_width: float,
    region_height: float,
    rng: np.random.Generator,
) -> BuildingGrid:
    """
    Generate a random city: each cell independently holds a building.

    Args:
        city: Building statistics (cell size, density, height range)
        region_width: Region extent along x, meters
        region_height: Region extent along y, meters
        rng: Seeded random source; the same seed gives the same grid

    Returns:
        BuildingGrid with uniform heights in [min_height, max_height] on
        occupied cells and 0 elsewhere
    """
    if city.cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {city.cell_size}")
    if city.min_height > city.max_height:
        raise ValueError(
            f"min_height {city.min_height} exceeds max_height {city.max_height}"
        )

    rows = math.ceil(region_height / city.cell_size)
    cols = math.ceil(region_width / city.cell_size)

    occupied = rng.random((rows, cols)) < city.density
    heights = rng.uniform(city.min_height, city.max_height, size=(rows, cols))
    heights = np.where(occupied, heights, 0.0)

    logger.debug(
        "Generated %dx%d city, %d buildings", rows, cols, int(occupied.sum())
    )
    return BuildingGrid(region_width, region_height, city.cell_size, heights)


def _raw_crossings(a: Point3, b: Point3, grid: BuildingGrid) -> List[Crossing]:
    """Crossings of every grid line, vertical lines first, unsorted."""
    dx = b.x - a.x
    dy = b.y - a.y
    dz = b.z - a.z
    c = grid.cell_size
    found: List[Crossing] = []

    if dx != 0.0:
        lo, hi = sorted((a.x, b.x))
        for i in range(math.floor(lo / c) + 1, math.ceil(hi / c)):
            x_line = i * c
            t = (x_line - a.x) / dx
            if 0.0 < t < 1.0:
                found.append(Crossing(t, x_line, a.y + t * dy, a.z + t * dz))

    if dy != 0.0:
        lo, hi = sorted((a.y, b.y))
        for j in range(math.floor(lo / c) + 1, math.ceil(hi / c)):
            y_line = j * c
            t = (y_line - a.y) / dy
            if 0.0 < t < 1.0:
                found.append(Crossing(t, a.x + t * dx, y_line, a.z + t * dz))
    return found


def crossing_points(a: Point3, b: Point3, grid: BuildingGrid) -> List[Crossing]:
    """
    List the points where the ground projection of segment a-b crosses a grid line.

    Each crossing carries the segment parameter ``t`` in (0, 1), the ground
    position, and the link height linearly interpolated at that position.
    Crossings are strictly sorted by ``t``; a pass exactly through a cell
    corner yields a single crossing at the corner.
    """
    if a.x == b.x and a.y == b.y:
        return []

    crossings: List[Crossing] = []
    # stable sort keeps a vertical-line crossing ahead of a horizontal one at equal t
    for crossing in sorted(_raw_crossings(a, b, grid), key=lambda item: item.t):
        if crossings and crossings[-1].t == crossing.t:
            crossings[-1] = crossings[-1]._replace(y=crossing.y)
            continue
        crossings.append(crossing)
    return crossings


def _touching_cells(
    x: float, y: float, grid: BuildingGrid
) -> Tuple[int, int, int, int]:
    """Row and column span of the cells whose closed square contains (x, y)."""
    c = grid.cell_size
    col_lo = min(max(math.ceil(x / c) - 1, 0), grid.cols - 1)
    col_hi = min(max(math.floor(x / c), 0), grid.cols - 1)
    row_lo = min(max(math.ceil(y / c) - 1, 0), grid.rows - 1)
    row_hi = min(max(math.floor(y / c), 0), grid.rows - 1)
    return row_lo, row_hi, col_lo, col_hi


def _local_height(x: float, y: float, grid: BuildingGrid) -> float:
    """Tallest building among the cells touching a ground position."""
    row_lo, row_hi, col_lo, col_hi = _touching_cells(x, y, grid)
    return float(grid.heights[row_lo : row_hi + 1, col_lo : col_hi + 1].max())


def los_link(uav: Point3, user: Point3, grid: BuildingGrid) -> bool:
    """
    Decide whether the link between a UAV and a user is line of sight.

    The link is blocked when, at either endpoint or at any grid-line
    crossing, its height is at or below the tallest building among the
    cells sharing that position. A tie counts as blocked.

    Args:
        uav: UAV position
        user: User position
        grid: Building map

    Returns:
        True for a LoS link (b = 1), False for NLoS (b = 0)
    """
    for point in (uav, user):
        if not grid.contains(point.x, point.y):
            raise ValueError(
                f"point ({point.x}, {point.y}) lies outside the "
                f"{grid.region_width}x{grid.region_height} region"
            )

    for point in (uav, user):
        if point.z <= _local_height(point.x, point.y, grid):
            return False

    for crossing in _raw_crossings(uav, user, grid):
        if crossing.z <= _local_height(crossing.x, crossing.y, grid):
            return False
    return True


def _line_crossing_blocked(
    along: np.ndarray,
    across: np.ndarray,
    d_along: np.ndarray,
    d_across: np.ndarray,
    dz: np.ndarray,
    z0: float,
    heights: np.ndarray,
    cell: float,
    lines: int,
    cells_along: int,
    cells_across: int,
) -> np.ndarray:
    """Blocked flags from crossings of the grid lines normal to one axis.

    ``heights`` is indexed ``[across, along]`` so the same routine serves
    both the vertical and the horizontal grid lines.
    """
    line_pos = np.arange(lines + 1, dtype=float) * cell
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (line_pos[None, :] - along[:, None]) / d_along[:, None]
    valid = np.isfinite(t) & (t > 0.0) & (t < 1.0)
    t = np.where(valid, t, 0.0)

    pos_across = across[:, None] + t * d_across[:, None]
    z = z0 + t * dz[:, None]

    idx = np.arange(lines + 1)[None, :]
    along_lo = np.clip(idx - 1, 0, cells_along - 1)
    along_hi = np.clip(idx, 0, cells_along - 1)
    across_lo = np.clip(np.ceil(pos_across / cell).astype(int) - 1, 0, cells_across - 1)
    across_hi = np.clip(np.floor(pos_across / cell).astype(int), 0, cells_across - 1)

    local = np.maximum.reduce(
        [
            heights[across_lo, along_lo],
            heights[across_lo, along_hi],
            heights[across_hi, along_lo],
            heights[across_hi, along_hi],
        ]
    )
    return np.any(valid & (z <= local), axis=1)


def _endpoint_heights(xy: np.ndarray, grid: BuildingGrid) -> np.ndarray:
    """Vectorized ``_local_height`` over an (n, 2) array of ground positions."""
    c = grid.cell_size
    col_lo = np.clip(np.ceil(xy[:, 0] / c).astype(int) - 1, 0, grid.cols - 1)
    col_hi = np.clip(np.floor(xy[:, 0] / c).astype(int), 0, grid.cols - 1)
    row_lo = np.clip(np.ceil(xy[:, 1] / c).astype(int) - 1, 0, grid.rows - 1)
    row_hi = np.clip(np.floor(xy[:, 1] / c).astype(int), 0, grid.rows - 1)
    h = grid.heights
    return np.maximum.reduce(
        [h[row_lo, col_lo], h[row_lo, col_hi], h[row_hi, col_lo], h[row_hi, col_hi]]
    )


def los_mask(source: Point3, targets: np.ndarray, grid: BuildingGrid) -> np.ndarray:
    """
    Vectorized line-of-sight test from one source to many targets.

    Applies exactly the rules of ``los_link`` to every row of ``targets``
    (an (n, 3) array). Targets outside the region are clamped to the edge
    cells instead of being rejected.

    Returns:
        Boolean array of length n, True where the link is LoS
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    if targets.shape[0] == 0:
        return np.zeros(0, dtype=bool)

    sx, sy, sz = float(source[0]), float(source[1]), float(source[2])
    dx = targets[:, 0] - sx
    dy = targets[:, 1] - sy
    dz = targets[:, 2] - sz

    source_height = _endpoint_heights(np.array([[sx, sy]]), grid)[0]
    blocked = np.full(targets.shape[0], sz <= source_height)
    blocked |= targets[:, 2] <= _endpoint_heights(targets[:, :2], grid)

    sx_arr = np.full(targets.shape[0], sx)
    sy_arr = np.full(targets.shape[0], sy)
    # vertical grid lines x = i*c
    blocked |= _line_crossing_blocked(
        sx_arr, sy_arr, dx, dy, dz, sz, grid.heights,
        grid.cell_size, grid.cols, grid.cols, grid.rows,
    )
    # horizontal grid lines y = j*c
    blocked |= _line_crossing_blocked(
        sy_arr, sx_arr, dy, dx, dz, sz, grid.heights.T,
        grid.cell_size, grid.rows, grid.rows, grid.cols,
    )
    return ~blocked


def save_grid(grid: BuildingGrid, path: Path) -> None:
    """Write a grid as a plain-text height matrix with a ``width height cell`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{grid.region_width!r} {grid.region_height!r} {grid.cell_size!r}\n")
        for row in grid.heights:
            f.write(" ".join(repr(float(h)) for h in row) + "\n")
    logger.info("Saved %dx%d grid to %s", grid.rows, grid.cols, path)


def load_grid(path: Path) -> BuildingGrid:
    """Read a grid written by ``save_grid``."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: header must be 'width height cell_size'")
        width, height, cell = (float(v) for v in header)
        heights = np.loadtxt(f, dtype=float, ndmin=2)
    return BuildingGrid(width, height, cell, heights)
