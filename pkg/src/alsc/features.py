"""Neighborhood and beam-derived point descriptors.

The standalone functions (``structure_tensor``, ``eigen_symmetric3``,
``tensor_features``, ``height_features``, ``distance_features``,
``echo_ratio``, ``scan_angle``) define each descriptor on one neighborhood.
:func:`feature_table` computes them for whole clouds through the grid
kernels and must agree with the standalone definitions row by row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .cloud import BEAM, ECHO, LABEL, MEASURED, PointCloud
from .index import SpatialIndex
from .tableio import Table, read_table, write_table

NEIGHBORHOOD_FEATURES = (
    "Linearity", "Planarity", "Omnivariance", "NormalX", "NormalY", "NormalZ",
    "NormalSigma", "EchoRatio", "ZRange", "ZRank", "NormalizedZ",
    "PointDensity", "PointDistance",
)
TENSOR_FEATURES = NEIGHBORHOOD_FEATURES[:7]
PASSTHROUGH = MEASURED + ECHO
SCAN_ANGLE = "ScanAngle"
BORDER_MODES = {
    "none": (),
    "beam": BEAM,
    "angle": (SCAN_ANGLE,),
    "both": BEAM + (SCAN_ANGLE,),
}
GEOMETRIES = ("cylinder", "sphere", "knn")

# number of global nearest neighbours cached for the PointDistance shortcut
KNN_SHORTCUT = 8


class Cause(IntEnum):
    """Why a feature value is missing."""

    OK = 0
    DEGENERATE = 1       # too few / collinear / coincident neighbours
    MISSING_INPUT = 2    # an input attribute was absent or invalid
    UNSPECIFIED = 3      # read back from a file, origin not recorded


@dataclass(frozen=True)
class NeighborhoodSpec:
    feature: str
    geometry: str = "cylinder"
    size: float = 2.0

    def __post_init__(self):
        if self.feature not in NEIGHBORHOOD_FEATURES:
            raise ValueError(f"unknown neighborhood feature {self.feature!r}")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if not self.size > 0:
            raise ValueError("neighborhood size must be positive")
        if self.geometry == "knn" and (self.size != int(self.size)):
            raise ValueError("knn size must be an integer count")
        if self.geometry == "knn" and self.feature == "EchoRatio":
            raise ValueError("EchoRatio needs a radius, not a neighbour count")

    def describe(self) -> str:
        return f"{self.feature} {self.geometry} {self.size!r}"


def uniform_specs(size: float, geometry: str = "cylinder") -> list[NeighborhoodSpec]:
    return [NeighborhoodSpec(f, geometry, size) for f in NEIGHBORHOOD_FEATURES]


def specs_from_radii(radii: Mapping[str, float], geometry: str = "cylinder") -> list[NeighborhoodSpec]:
    return [NeighborhoodSpec(f, geometry, float(radii[f])) for f in NEIGHBORHOOD_FEATURES]


# ------------------------------------------------------------ single ops

@dataclass(frozen=True)
class StructureTensor:
    matrix: np.ndarray
    count: int
    centroid: np.ndarray


@dataclass(frozen=True)
class EigenTriple:
    values: np.ndarray     # descending, clamped at 0
    vectors: np.ndarray    # row i pairs with values[i]


def structure_tensor(neighbors) -> StructureTensor:
    """Scatter of the neighbors about their centroid, divided by ``count - 1``."""
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("structure tensor of an empty neighborhood")
    centroid = pts.mean(axis=0)
    if len(pts) == 1:
        return StructureTensor(np.zeros((3, 3)), 1, centroid)
    dev = pts - centroid
    return StructureTensor(dev.T @ dev / (len(pts) - 1.0), len(pts), centroid)


def eigen_symmetric3(T) -> EigenTriple:
    m = T.matrix if isinstance(T, StructureTensor) else np.asarray(T, dtype=np.float64)
    assert m.shape == (3, 3), "expected a 3x3 matrix"
    assert np.array_equal(m, m.T), "matrix is not symmetric"
    w, V, _ = kernels.impl.eig3_batch(np.ascontiguousarray(m)[None])
    return EigenTriple(w[0], V[0])


def _orient_normal(v: np.ndarray) -> np.ndarray:
    nx, ny, nz = v
    if nz < 0.0 or (nz == 0.0 and (nx < 0.0 or (nx == 0.0 and ny < 0.0))):
        return -v
    return v


def tensor_features(eig: EigenTriple) -> dict[str, float]:
    """Shape scores and plane normal from a structure-tensor spectrum.

    Invalid entries are NaN: all of them when the largest eigenvalue is 0,
    the normal and its sigma when the spectrum is that of a line.
    """
    l1, l2, l3 = (float(v) for v in eig.values)
    out = dict.fromkeys(TENSOR_FEATURES, math.nan)
    if l1 <= 0.0:
        return out
    out["Linearity"] = (l1 - l2) / l1
    out["Planarity"] = (l2 - l3) / l1
    out["Omnivariance"] = float(np.cbrt(l1 * l2 * l3))
    if l2 <= 1e-12 * l1:
        return out
    nx, ny, nz = _orient_normal(np.asarray(eig.vectors[2], dtype=np.float64))
    out.update(NormalX=float(nx), NormalY=float(ny), NormalZ=float(nz),
               NormalSigma=math.sqrt(l3))
    return out


def height_features(neighbor_z, query_z: float) -> dict[str, float]:
    """Height range, 1-based average rank of ``query_z``, and rank-scaled range.

    ``neighbor_z`` includes the query point.  NormalizedZ is the rank mapped
    to [0, 1] times the range, so it carries the unit of z.
    """
    z = np.asarray(neighbor_z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty neighborhood")
    zr = float(z.max() - z.min())
    rank = np.count_nonzero(z < query_z) + (np.count_nonzero(z == query_z) + 1.0) / 2.0
    n = z.size
    nz = (rank - 1.0) / (n - 1.0) * zr if n > 1 else 0.0
    return {"ZRange": zr, "ZRank": float(rank), "NormalizedZ": float(nz)}


def distance_features(neighbors, radius: float) -> dict[str, float]:
    """Mean nearest-neighbour distance within the set, and points per m^2."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(neighbors, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    density = n / (math.pi * radius * radius)
    if n < 2:
        return {"PointDistance": math.nan, "PointDensity": density}
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d, np.inf)
    return {"PointDistance": float(np.sqrt(d.min(axis=1)).mean()),
            "PointDensity": density}


def echo_ratio(index: SpatialIndex, center, radius: float) -> float:
    """Sphere count over cylinder count at ``radius``; 1 for open surfaces."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    ncyl = len(index.query_cylinder(center, radius))
    nsph = len(index.query_sphere(center, radius))
    if ncyl == 0:
        raise ValueError("center has no cylinder neighbours; is it in the cloud?")
    return nsph / ncyl


def scan_angle(vx, vy, vz):
    """Off-nadir beam angle in degrees; NaN where ``vz == 0``."""
    vx, vy, vz = (np.asarray(v, dtype=np.float64) for v in (vx, vy, vz))
    with np.errstate(invalid="ignore"):
        phi = np.degrees(np.arctan2(np.hypot(vx, vy), np.abs(vz)))
    phi = np.where(vz == 0.0, np.nan, phi)
    return float(phi) if phi.ndim == 0 else phi


# ------------------------------------------------------------ tables

@dataclass
class FeatureMatrix:
    names: list[str]
    values: np.ndarray
    causes: np.ndarray
    specs: tuple[NeighborhoodSpec, ...] = ()
    labels: np.ndarray | None = None
    point_ids: np.ndarray | None = None
    border_mode: str = "none"
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.point_ids is None:
            self.point_ids = np.arange(len(self.values), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.values)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def invalid_counts(self) -> dict[str, int]:
        bad = self.causes != Cause.OK
        return {n: int(c) for n, c in zip(self.names, bad.sum(axis=0))}

    def rows(self, ids) -> "FeatureMatrix":
        ids = np.asarray(ids)
        return FeatureMatrix(list(self.names), self.values[ids], self.causes[ids],
                             self.specs,
                             None if self.labels is None else self.labels[ids],
                             self.point_ids[ids], self.border_mode, dict(self.meta))

    def to_table(self) -> Table:
        comments = [f"border_mode {self.border_mode}"]
        comments += [f"spec {s.describe()}" for s in self.specs]
        comments += [f"meta {k} {v}" for k, v in sorted(self.meta.items())]
        cols = ["point_id"] + list(self.names)
        data = {"point_id": self.point_ids.astype(np.float64)}
        for j, n in enumerate(self.names):
            data[n] = self.values[:, j]
        if self.labels is not None:
            cols.append(LABEL)
            data[LABEL] = self.labels.astype(np.float64)
        return Table(cols, data, comments)

    @classmethod
    def from_table(cls, table: Table) -> "FeatureMatrix":
        specs = []
        border = "none"
        meta: dict[str, str] = {}
        for line in table.comments:
            key, _, rest = line.partition(" ")
            if key == "border_mode":
                border = rest.strip()
            elif key == "spec":
                f, g, s = rest.split()
                specs.append(NeighborhoodSpec(f, g, float(s)))
            elif key == "meta":
                k, _, v = rest.partition(" ")
                meta[k] = v
        names = [c for c in table.columns if c not in ("point_id", LABEL)]
        values = (np.column_stack([table.data[c] for c in names])
                  if names else np.empty((table.nrows, 0)))
        causes = np.where(np.isnan(values), Cause.UNSPECIFIED, Cause.OK).astype(np.uint8)
        labels = table.data[LABEL].astype(np.int64) if LABEL in table.data else None
        ids = (table.data["point_id"].astype(np.int64) if "point_id" in table.data
               else None)
        return cls(names, values, causes, tuple(specs), labels, ids, border, meta)


def write_features(path: str | Path, fm: FeatureMatrix, binary: bool | None = None) -> None:
    write_table(path, fm.to_table(), binary=binary)


def read_features(path: str | Path) -> FeatureMatrix:
    return FeatureMatrix.from_table(read_table(path))


def required_columns(border_mode: str) -> tuple[str, ...]:
    if border_mode not in BORDER_MODES:
        raise ValueError(f"unknown border mode {border_mode!r}")
    return BEAM if border_mode != "none" else ()


def build_index(cloud: PointCloud, specs: Iterable[NeighborhoodSpec] = ()) -> SpatialIndex:
    radii = [s.size for s in specs if s.geometry != "knn"]
    return SpatialIndex(cloud.xyz, max_radius=max(radii, default=6.0))


def neighborhood_block(index: SpatialIndex, radius: float, geometry: str = "cylinder",
                       centers: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All 13 neighborhood features at one radius: ``(values, causes)``."""
    if geometry not in ("cylinder", "sphere"):
        raise ValueError("neighborhood_block handles cylinder and sphere only")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if centers is None:
        centers = np.arange(len(index), dtype=np.int64)
    centers = np.ascontiguousarray(centers, dtype=np.int64)
    knn_ids, _ = index.knn_table(KNN_SHORTCUT)
    return kernels.impl.neighborhood_features(
        *index.grid, knn_ids, centers, float(radius), geometry == "sphere")


def _knn_block(index: SpatialIndex, k: int, centers: np.ndarray):
    xyz = index.xyz
    vals = np.full((len(centers), len(NEIGHBORHOOD_FEATURES)), np.nan)
    causes = np.zeros(vals.shape, dtype=np.uint8)
    er = NEIGHBORHOOD_FEATURES.index("EchoRatio")
    for t, i in enumerate(centers.tolist()):
        # the point itself plus its k nearest others
        ids = index.query_knn(xyz[i], k + 1)
        pts = xyz[ids]
        row = {}
        st = structure_tensor(pts)
        if st.count >= 3:
            row.update(tensor_features(eigen_symmetric3(st)))
        row.update(height_features(pts[:, 2], xyz[i, 2]))
        reach = float(np.sqrt(((pts[:, :2] - xyz[i, :2]) ** 2).sum(axis=1)).max())
        if reach > 0:
            row.update(distance_features(pts, reach))
        for j, name in enumerate(NEIGHBORHOOD_FEATURES):
            if j == er:
                continue
            v = row.get(name, math.nan)
            vals[t, j] = v
            if math.isnan(v):
                causes[t, j] = Cause.DEGENERATE
    causes[:, er] = Cause.DEGENERATE
    return vals, causes


def feature_table(cloud: PointCloud, index: SpatialIndex | None = None,
                  specs: Sequence[NeighborhoodSpec] | None = None,
                  border_mode: str = "none",
                  rows: np.ndarray | None = None) -> FeatureMatrix:
    """Feature matrix for ``cloud`` (or its ``rows``) under ``specs``.

    Columns: the 13 neighborhood features, each under its own spec, then
    the pass-through echo attributes, then the border columns of
    ``border_mode``.  Labels are attached when the cloud is fully labeled.
    """
    if specs is None:
        raise ValueError("feature_table needs one spec per neighborhood feature")
    by_feature = {s.feature: s for s in specs}
    missing = [f for f in NEIGHBORHOOD_FEATURES if f not in by_feature]
    if missing:
        raise ValueError(f"no neighborhood spec for {missing}")
    if border_mode not in BORDER_MODES:
        raise ValueError(f"unknown border mode {border_mode!r}")
    absent = [c for c in required_columns(border_mode) if c not in cloud.schema]
    if absent:
        raise ValueError(f"border mode {border_mode!r} needs columns {list(absent)}")
    if index is None:
        index = build_index(cloud, by_feature.values())
    if len(index) != len(cloud):
        raise ValueError("index does not match the cloud")
    centers = (np.arange(len(cloud), dtype=np.int64) if rows is None
               else np.asarray(rows, dtype=np.int64))
    n = len(centers)
    names = list(NEIGHBORHOOD_FEATURES)
    values = np.empty((n, len(names)))
    causes = np.zeros((n, len(names)), dtype=np.uint8)
    groups: dict[tuple[str, float], list[int]] = {}
    for j, f in enumerate(NEIGHBORHOOD_FEATURES):
        s = by_feature[f]
        groups.setdefault((s.geometry, s.size), []).append(j)
    for (geometry, size), cols in sorted(groups.items()):
        if geometry == "knn":
            v, c = _knn_block(index, int(size), centers)
        else:
            v, c = neighborhood_block(index, size, geometry, centers)
        values[:, cols] = v[:, cols]
        causes[:, cols] = c[:, cols]

    extra_names: list[str] = []
    extra_vals: list[np.ndarray] = []
    for name in PASSTHROUGH:
        if name in cloud.schema:
            extra_names.append(name)
            extra_vals.append(cloud.masked(name)[centers])
    if border_mode in ("beam", "both"):
        for name in BEAM:
            extra_names.append(name)
            extra_vals.append(cloud.masked(name)[centers])
    if border_mode in ("angle", "both"):
        ang = scan_angle(*(cloud.masked(c)[centers] for c in BEAM))
        extra_names.append(SCAN_ANGLE)
        extra_vals.append(np.asarray(ang, dtype=np.float64))
    if extra_names:
        ev = np.column_stack(extra_vals)
        values = np.hstack([values, ev])
        causes = np.hstack([causes, np.where(np.isnan(ev), Cause.MISSING_INPUT,
                                             Cause.OK).astype(np.uint8)])
        names += extra_names
    labels = None
    if LABEL in cloud.schema and cloud.valid(LABEL)[centers].all():
        labels = cloud.column(LABEL)[centers].astype(np.int64)
    ordered_specs = tuple(by_feature[f] for f in NEIGHBORHOOD_FEATURES)
    return FeatureMatrix(names, values, causes, ordered_specs, labels,
                         centers.copy(), border_mode)


def radius_stack(cloud: PointCloud, radii: Sequence[float], index: SpatialIndex | None = None,
                 rows: np.ndarray | None = None) -> np.ndarray:
    """Cylinder features at every radius: array ``(len(radii), n, 13)``.

    Invalid values are NaN.
    """
    if index is None:
        index = SpatialIndex(cloud.xyz, max_radius=max(radii))
    centers = (np.arange(len(cloud), dtype=np.int64) if rows is None
               else np.asarray(rows, dtype=np.int64))
    out = np.empty((len(radii), len(centers), len(NEIGHBORHOOD_FEATURES)))
    for k, r in enumerate(radii):
        out[k], _ = neighborhood_block(index, r, "cylinder", centers)
    return out
