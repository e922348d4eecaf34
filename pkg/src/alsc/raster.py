"""Gridded surfaces and shaded relief for visual inspection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .classes import ClassTable
from .cloud import LABEL, PointCloud

NODATA = -9999.0


@dataclass
class Grid:
    """Row 0 is the northern edge; ``x0, y0`` is the lower-left corner."""

    values: np.ndarray
    x0: float
    y0: float
    cell: float
    nodata: float = NODATA

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_ascii(self, decimals: int = 6) -> str:
        rows, cols = self.values.shape
        head = [f"ncols {cols}", f"nrows {rows}", f"xllcorner {self.x0!r}",
                f"yllcorner {self.y0!r}", f"cellsize {self.cell!r}",
                f"NODATA_value {self.nodata:g}"]
        v = np.where(np.isnan(self.values), self.nodata, self.values)
        body = [" ".join(f"{x:.{decimals}f}" for x in row) for row in v]
        return "\n".join(head + body) + "\n"

    @classmethod
    def from_ascii(cls, text: str) -> "Grid":
        lines = text.splitlines()
        head = {}
        for ln in lines[:6]:
            k, v = ln.split()
            head[k.lower()] = float(v)
        vals = np.array([[float(x) for x in ln.split()] for ln in lines[6:] if ln.strip()])
        vals = vals.reshape(int(head["nrows"]), int(head["ncols"]))
        nod = head["nodata_value"]
        vals[vals == nod] = np.nan
        return cls(vals, head["xllcorner"], head["yllcorner"], head["cellsize"], nod)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ascii())


def ground_codes(classes: ClassTable) -> list[int]:
    """The ground class and its refinements."""
    return [c for c in classes.codes if classes.parent(c) == 2]


def select_points(cloud: PointCloud, class_filter: str = "ground") -> tuple[np.ndarray, str]:
    """Rows kept by ``class_filter`` and the statistic to grid them with.

    ``ground`` keeps ground-family points (minimum z, a terrain model),
    ``all`` keeps everything (maximum z, a surface model), and a comma list
    of codes keeps those classes (minimum z if all of them are ground).
    """
    f = class_filter.strip().lower()
    if f == "all":
        return np.arange(len(cloud)), "max"
    if not cloud.is_labeled:
        raise ValueError("class filter needs a labeled cloud; use 'all'")
    ground = ground_codes(cloud.classes)
    codes = ground if f == "ground" else [int(t) for t in f.split(",") if t.strip()]
    if not codes:
        raise ValueError("empty class filter")
    keep = np.flatnonzero(np.isin(cloud.masked(LABEL), codes))
    return keep, "min" if set(codes) <= set(ground) else "max"


def grid_surface(x, y, z, cell: float, stat: str = "min", bounds=None) -> Grid:
    """Per-cell min or max of ``z``; empty cells stay NaN."""
    if not cell > 0:
        raise ValueError("cell size must be positive")
    if stat not in ("min", "max"):
        raise ValueError("stat must be 'min' or 'max'")
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    if x.size == 0:
        raise ValueError("no points to grid")
    if bounds is None:
        bounds = (x.min(), y.min(), x.max(), y.max())
    x0, y0, x1, y1 = bounds
    cols = max(1, int(math.ceil((x1 - x0) / cell - 1e-9)))
    rows = max(1, int(math.ceil((y1 - y0) / cell - 1e-9)))
    ci = np.clip(((x - x0) / cell).astype(np.int64), 0, cols - 1)
    ri = np.clip(((y1 - y) / cell).astype(np.int64), 0, rows - 1)
    flat = ri * cols + ci
    out = np.full(rows * cols, np.inf if stat == "min" else -np.inf)
    (np.minimum if stat == "min" else np.maximum).at(out, flat, z)
    out[~np.isfinite(out)] = np.nan
    return Grid(out.reshape(rows, cols), float(x0), float(y1 - rows * cell), float(cell))


def fill_nearest(grid: Grid) -> Grid:
    """Empty cells take the value of the nearest filled cell."""
    v = grid.values
    empty = np.isnan(v)
    if empty.all():
        raise ValueError("grid has no filled cells")
    if not empty.any():
        return grid
    _, (ri, ci) = ndimage.distance_transform_edt(empty, return_indices=True)
    return Grid(v[ri, ci], grid.x0, grid.y0, grid.cell, grid.nodata)


def hillshade(grid: Grid, azimuth: float = 315.0, elevation: float = 45.0) -> Grid:
    """Shaded relief in 0..255 from central-difference gradients.

    Azimuth is clockwise from north, so the default lights the surface
    from the northwest.  Edges use one-sided differences.
    """
    z = grid.values
    if np.isnan(z).any():
        raise ValueError("fill the grid before shading")
    zenith = math.radians(90.0 - elevation)
    az = math.radians((360.0 - azimuth + 90.0) % 360.0)
    dzdx = np.gradient(z, grid.cell, axis=1) if z.shape[1] > 1 else np.zeros_like(z)
    # rows run north to south, so this is the southward rate
    dzdy = np.gradient(z, grid.cell, axis=0) if z.shape[0] > 1 else np.zeros_like(z)
    slope = np.arctan(np.hypot(dzdx, dzdy))
    aspect = np.arctan2(dzdy, -dzdx)
    shade = (math.cos(zenith) * np.cos(slope)
             + math.sin(zenith) * np.sin(slope) * np.cos(az - aspect))
    return Grid(255.0 * np.clip(shade, 0.0, None), grid.x0, grid.y0, grid.cell, grid.nodata)


def cloud_hillshade(cloud: PointCloud, class_filter: str = "ground", cell: float = 1.0,
                    azimuth: float = 315.0, elevation: float = 45.0) -> tuple[Grid, Grid]:
    """(filled surface, hillshade) for the selected points of ``cloud``."""
    if not cell > 0:
        raise ValueError("cell size must be positive")
    rows, stat = select_points(cloud, class_filter)
    x, y, z = (cloud.column(c)[rows] for c in ("x", "y", "z"))
    xyz_all = cloud.xyz
    bounds = (xyz_all[:, 0].min(), xyz_all[:, 1].min(), xyz_all[:, 0].max(), xyz_all[:, 1].max())
    surface = fill_nearest(grid_surface(x, y, z, cell, stat, bounds))
    return surface, hillshade(surface, azimuth, elevation)
