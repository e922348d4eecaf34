"""Point-cloud data model, validated ingestion and class breakdowns."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classes import DEFAULT_CLASSES, ClassTable
from .tableio import FormatError, Table, read_table, write_table

logger = logging.getLogger(__name__)

XYZ = ("x", "y", "z")
ECHO = ("echo_id", "echo_count")
MEASURED = ("amplitude", "echo_width", "reflectance")
BEAM = ("vx", "vy", "vz")
LABEL = "class_code"
ALL_COLUMNS = XYZ + ECHO + MEASURED + BEAM + (LABEL,)


@dataclass(frozen=True)
class ValidRanges:
    """Accepted value ranges; values outside are kept but flagged invalid.

    Bounds are ``(low, high, low_inclusive)``; ``None`` means unbounded.
    """

    amplitude: tuple = (0.0, None, True)
    echo_width: tuple = (0.0, None, False)
    reflectance: tuple = (0.0, 2.0, True)

    def check(self, name: str, values: np.ndarray) -> np.ndarray:
        low, high, inclusive = getattr(self, name)
        ok = ~np.isnan(values)
        if low is not None:
            ok &= (values >= low) if inclusive else (values > low)
        if high is not None:
            ok &= values <= high
        return ok


@dataclass(frozen=True)
class PointRecord:
    """One laser echo.  Invalid attributes read back as ``None``."""

    x: float
    y: float
    z: float
    echo_id: int | None = None
    echo_count: int | None = None
    amplitude: float | None = None
    echo_width: float | None = None
    reflectance: float | None = None
    vx: float | None = None
    vy: float | None = None
    vz: float | None = None
    class_code: int | None = None


@dataclass
class IngestReport:
    n_records: int
    invalid_counts: dict[str, int]
    warnings: list[str] = field(default_factory=list)


class PointCloud:
    """Immutable columnar point cloud.

    Each declared column is a float64 array of raw values (NaN where the
    source had no value) with a matching boolean validity mask.  Undeclared
    optional columns are simply absent from :attr:`schema`.
    """

    def __init__(self, columns: Mapping[str, np.ndarray],
                 valid: Mapping[str, np.ndarray] | None = None,
                 classes: ClassTable = DEFAULT_CLASSES,
                 report: IngestReport | None = None):
        missing = [c for c in XYZ if c not in columns]
        if missing:
            raise ValueError(f"point cloud requires columns {missing}")
        unknown = [c for c in columns if c not in ALL_COLUMNS]
        if unknown:
            raise ValueError(f"unknown point columns {unknown}")
        n = len(columns["x"])
        self._data: dict[str, np.ndarray] = {}
        self._valid: dict[str, np.ndarray] = {}
        for name in ALL_COLUMNS:
            if name not in columns:
                continue
            a = np.array(columns[name], dtype=np.float64)
            if a.shape != (n,):
                raise ValueError(f"column {name} has shape {a.shape}, expected ({n},)")
            m = (np.array(valid[name], dtype=bool) if valid and name in valid
                 else ~np.isnan(a))
            a.flags.writeable = False
            m.flags.writeable = False
            self._data[name] = a
            self._valid[name] = m
        self.classes = classes
        self.report = report
        if n:
            xyz = self.xyz
            self.bbox = (xyz.min(axis=0), xyz.max(axis=0))
        else:
            self.bbox = (np.full(3, np.nan), np.full(3, np.nan))

    def __len__(self) -> int:
        return len(self._data["x"])

    @property
    def schema(self) -> tuple[str, ...]:
        return tuple(self._data)

    def has(self, *names: str) -> bool:
        return all(n in self._data for n in names)

    def column(self, name: str) -> np.ndarray:
        return self._data[name]

    def valid(self, name: str) -> np.ndarray:
        return self._valid[name]

    def masked(self, name: str) -> np.ndarray:
        """Column copy with invalid entries replaced by NaN."""
        a = self._data[name].copy()
        a[~self._valid[name]] = np.nan
        return a

    @property
    def xyz(self) -> np.ndarray:
        return np.column_stack([self._data[c] for c in XYZ])

    @property
    def is_labeled(self) -> bool:
        return LABEL in self._data and bool(self._valid[LABEL].any())

    @property
    def labels(self) -> np.ndarray:
        """Integer class codes; raises if any point is unlabeled."""
        if LABEL not in self._data:
            raise ValueError("point cloud carries no class codes")
        if not self._valid[LABEL].all():
            raise ValueError("point cloud has unlabeled points")
        return self._data[LABEL].astype(np.int64)

    def record(self, i: int) -> PointRecord:
        vals = {}
        for name in self._data:
            if self._valid[name][i]:
                v = float(self._data[name][i])
                vals[name] = int(v) if name in ECHO + (LABEL,) else v
        return PointRecord(**vals)

    def subset(self, ids: Sequence[int] | np.ndarray) -> "PointCloud":
        ids = np.asarray(ids)
        return PointCloud({k: v[ids] for k, v in self._data.items()},
                          {k: v[ids] for k, v in self._valid.items()},
                          classes=self.classes)

    def with_columns(self, **columns: np.ndarray) -> "PointCloud":
        """Copy with some columns replaced (validity recomputed for them)."""
        data = dict(self._data)
        valid = dict(self._valid)
        for k, v in columns.items():
            data[k] = np.asarray(v, dtype=np.float64)
            valid[k] = ~np.isnan(data[k])
        return PointCloud(data, valid, classes=self.classes)

    def to_table(self) -> Table:
        return Table(list(self._data), {k: v for k, v in self._data.items()})


def validate_columns(data: Mapping[str, np.ndarray],
                     classes: ClassTable = DEFAULT_CLASSES,
                     ranges: ValidRanges = ValidRanges(),
                     ) -> tuple[dict[str, np.ndarray], IngestReport]:
    """Compute validity masks for raw columns.

    Raises ``FormatError`` (with a 1-based data-row number) for rows that
    cannot be represented: missing coordinates, unknown or non-integer class
    codes.
    """
    n = len(data["x"])
    valid: dict[str, np.ndarray] = {}
    warnings: list[str] = []
    for c in XYZ:
        a = data[c]
        bad = ~np.isfinite(a)
        if bad.any():
            raise FormatError(f"missing or non-finite coordinate {c!r}",
                              int(np.argmax(bad)) + 1)
        valid[c] = np.ones(n, dtype=bool)
    if LABEL in data:
        codes = data[LABEL]
        present = ~np.isnan(codes)
        nonint = present & (codes != np.round(codes))
        if nonint.any():
            raise FormatError("non-integer class code", int(np.argmax(nonint)) + 1)
        known = np.array(classes.codes, dtype=np.float64)
        unknown = present & ~np.isin(codes, known)
        if unknown.any():
            i = int(np.argmax(unknown))
            raise FormatError(f"unknown class code {int(codes[i])}", i + 1)
        valid[LABEL] = present
    for c in MEASURED:
        if c in data:
            valid[c] = ranges.check(c, data[c])
    if any(c in data for c in ECHO):
        eid = data.get("echo_id")
        ecnt = data.get("echo_count")
        ok_id = (~np.isnan(eid) & (eid >= 1) & (eid == np.round(eid))
                 if eid is not None else None)
        ok_cnt = (~np.isnan(ecnt) & (ecnt >= 1) & (ecnt == np.round(ecnt))
                  if ecnt is not None else None)
        if eid is not None and ecnt is not None:
            both = ok_id & ok_cnt
            inconsistent = both & (eid > ecnt)
            if inconsistent.any():
                warnings.append(
                    f"{int(inconsistent.sum())} records with echo_id > echo_count; "
                    "echo attributes flagged invalid")
            ok_id = ok_id & ~inconsistent
            ok_cnt = ok_cnt & ~inconsistent
        if ok_id is not None:
            valid["echo_id"] = ok_id
        if ok_cnt is not None:
            valid["echo_count"] = ok_cnt
    if any(c in data for c in BEAM):
        if not all(c in data for c in BEAM):
            raise FormatError("beam vector needs all of vx, vy, vz")
        vx, vy, vz = (data[c] for c in BEAM)
        ok = np.isfinite(vx) & np.isfinite(vy) & np.isfinite(vz) & (vz < 0)
        upward = np.isfinite(vz) & (vz >= 0)
        if upward.any():
            warnings.append(f"{int(upward.sum())} beam vectors with vz >= 0 "
                            "flagged invalid")
        for c in BEAM:
            valid[c] = ok.copy()
    invalid_counts = {c: int(n - valid[c].sum()) for c in valid}
    return valid, IngestReport(n, invalid_counts, warnings)


def ingest(path: str | Path, schema: Sequence[str] | None = None,
           classes: ClassTable = DEFAULT_CLASSES,
           ranges: ValidRanges = ValidRanges()) -> PointCloud:
    """Read and validate a point file (text or ALSC binary).

    ``schema`` lists the columns to load; by default every recognised
    column in the file.  Out-of-range values are kept and flagged invalid.
    """
    table = read_table(path)
    if schema is None:
        schema = [c for c in table.columns if c in ALL_COLUMNS]
    schema = list(schema)
    for c in XYZ:
        if c not in schema:
            raise ValueError(f"schema must include {c!r}")
    absent = [c for c in schema if c not in table.columns]
    if absent:
        raise FormatError(f"{path}: declared columns not in file: {absent}")
    data = {c: table.data[c] for c in schema}
    valid, report = validate_columns(data, classes, ranges)
    for w in report.warnings:
        logger.warning("%s: %s", path, w)
    logger.info("%s: %d records, invalid counts %s", path, report.n_records,
                {k: v for k, v in report.invalid_counts.items() if v})
    return PointCloud(data, valid, classes=classes, report=report)


def from_arrays(classes: ClassTable = DEFAULT_CLASSES,
                ranges: ValidRanges = ValidRanges(),
                **columns: np.ndarray) -> PointCloud:
    """Build a validated cloud from in-memory columns."""
    data = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}
    valid, report = validate_columns(data, classes, ranges)
    return PointCloud(data, valid, classes=classes, report=report)


def write_cloud(path: str | Path, cloud: PointCloud, binary: bool | None = None) -> None:
    write_table(path, cloud.to_table(), binary=binary)


def class_breakdown(cloud: PointCloud, level: int = 2) -> list[tuple[int, int, float]]:
    """Per-class ``(code, count, fraction)`` rows, sorted by code.

    At level 1, level-2 codes are rolled up into their parents.
    """
    if level not in (1, 2):
        raise ValueError("level must be 1 or 2")
    if LABEL not in cloud.schema or not cloud.valid(LABEL).any():
        raise ValueError("point cloud is unlabeled")
    codes = cloud.column(LABEL)[cloud.valid(LABEL)].astype(np.int64)
    if level == 1:
        parent = {c: cloud.classes.parent(c) for c in np.unique(codes).tolist()}
        codes = np.array([parent[c] for c in codes.tolist()], dtype=np.int64)
    uniq, counts = np.unique(codes, return_counts=True)
    total = counts.sum()
    return [(int(c), int(k), k / total) for c, k in zip(uniq, counts)]


def format_breakdown(rows: list[tuple[int, int, float]], classes: ClassTable) -> str:
    lines = [f"{'code':>5}  {'count':>9}  {'share':>7}  class"]
    for code, count, frac in rows:
        lines.append(f"{code:>5}  {count:>9}  {frac:>7.2%}  {classes.name(code)}")
    return "\n".join(lines)
