"""Uniform-grid spatial index over (x, y) for cylinder, sphere and kNN queries."""

from __future__ import annotations

import math

import numpy as np

from . import kernels


class SpatialIndex:
    """Points bucketed into square (x, y) cells.

    ``cell_size`` only affects speed, never results.  The default ties it to
    the largest radius the caller expects to query: ``max_radius / 6``,
    which keeps each cylinder query to roughly 13 x 13 cells.

    Query results are arrays of point ids in ascending order (kNN: ordered
    by distance, ties by id).  A query point that belongs to the cloud is a
    member of its own neighborhood.
    """

    def __init__(self, xyz: np.ndarray, cell_size: float | None = None,
                 max_radius: float = 6.0):
        xyz = np.array(xyz, dtype=np.float64, order="C")
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError("xyz must have shape (n, 3)")
        if cell_size is None:
            cell_size = max_radius / 6.0
        if not cell_size > 0:
            raise ValueError("cell_size must be positive")
        self.xyz = xyz
        xyz.flags.writeable = False
        n = len(xyz)
        if n:
            lo = xyz[:, :2].min(axis=0)
            hi = xyz[:, :2].max(axis=0)
        else:
            lo = hi = np.zeros(2)
        # keep the dense cell array bounded for tiny cell sizes
        span = max(hi[0] - lo[0], hi[1] - lo[1], 0.0)
        while (span / cell_size + 1) ** 2 > max(4 * n, 1 << 16):
            cell_size *= 2.0
        self.cell = float(cell_size)
        self.x0, self.y0 = float(lo[0]), float(lo[1])
        self.nx = int(math.floor((hi[0] - lo[0]) / self.cell)) + 1
        self.ny = int(math.floor((hi[1] - lo[1]) / self.cell)) + 1
        ix = np.clip(np.floor((xyz[:, 0] - self.x0) / self.cell).astype(np.int64), 0, self.nx - 1)
        iy = np.clip(np.floor((xyz[:, 1] - self.y0) / self.cell).astype(np.int64), 0, self.ny - 1)
        cell_id = iy * self.nx + ix
        self.order = np.argsort(cell_id, kind="stable").astype(np.int64)
        counts = np.bincount(cell_id, minlength=self.nx * self.ny)
        self.cell_start = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_start[1:])
        self.cell_of = cell_id
        self._knn_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def grid(self) -> tuple:
        """Arguments shared by the grid kernels."""
        return (self.xyz, self.order, self.cell_start, self.x0, self.y0,
                self.cell, self.nx, self.ny)

    def _candidates(self, cx: float, cy: float, reach: float) -> np.ndarray:
        ix0 = max(int(math.floor((cx - reach - self.x0) / self.cell)), 0)
        ix1 = min(int(math.floor((cx + reach - self.x0) / self.cell)), self.nx - 1)
        iy0 = max(int(math.floor((cy - reach - self.y0) / self.cell)), 0)
        iy1 = min(int(math.floor((cy + reach - self.y0) / self.cell)), self.ny - 1)
        if ix0 > ix1 or iy0 > iy1:
            return np.empty(0, dtype=np.int64)
        parts = [self.order[self.cell_start[iy * self.nx + ix0]:
                            self.cell_start[iy * self.nx + ix1 + 1]]
                 for iy in range(iy0, iy1 + 1)]
        return np.concatenate(parts)

    def query_cylinder(self, center, radius: float) -> np.ndarray:
        """Ids with planar distance to ``center`` at most ``radius``; z unbounded."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        cx, cy = float(center[0]), float(center[1])
        cand = self._candidates(cx, cy, radius)
        dx = self.xyz[cand, 0] - cx
        dy = self.xyz[cand, 1] - cy
        return np.sort(cand[dx * dx + dy * dy <= radius * radius])

    def query_sphere(self, center, radius: float) -> np.ndarray:
        """Ids with 3D distance to ``center`` at most ``radius``."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        cx, cy, cz = (float(c) for c in center[:3])
        cand = self._candidates(cx, cy, radius)
        dx = self.xyz[cand, 0] - cx
        dy = self.xyz[cand, 1] - cy
        dz = self.xyz[cand, 2] - cz
        return np.sort(cand[dx * dx + dy * dy + dz * dz <= radius * radius])

    def query_knn(self, center, k: int) -> np.ndarray:
        """The ``k`` nearest ids by 3D distance, ties broken by ascending id."""
        if k < 1:
            raise ValueError("k must be at least 1")
        n = len(self.xyz)
        if n == 0:
            raise ValueError("index is empty")
        k = min(k, n)
        cx, cy, cz = (float(c) for c in center[:3])
        reach = self.cell
        while True:
            cand = self._candidates(cx, cy, reach)
            d = self.xyz[cand] - (cx, cy, cz)
            dd = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
            sel = np.lexsort((cand, dd))[:k]
            # every point within ``reach`` of the center is a candidate
            if len(cand) == n or (len(sel) == k and dd[sel[-1]] <= reach * reach):
                return cand[sel]
            reach *= 2.0

    def knn_table(self, k: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Per-point ids and squared distances of the ``k`` nearest others (cached)."""
        if k not in self._knn_cache:
            self._knn_cache[k] = kernels.impl.knn_table(*self.grid, k)
        return self._knn_cache[k]
