"""Column-table interchange: header-bearing delimited text and ALSC binary.

Both formats carry the same content: an ordered list of named float64
columns plus free-form comment lines.  Missing values are NaN in memory,
``NA`` in text.

Text layout::

    # comment line
    x,y,z,class_code
    1.5,2.25,0.0,2

Binary layout (all little-endian)::

    b"ALSC" | version: u8 | meta_len: u32 | meta: utf-8 JSON
    | nrows: u64 | columns, each nrows float64, in header order

``meta`` holds ``{"columns": [...], "comments": [...]}``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ALSC"
VERSION = 1
MISSING = "NA"


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass
class Table:
    columns: list[str]
    data: dict[str, np.ndarray]
    comments: list[str] = field(default_factory=list)

    @property
    def nrows(self) -> int:
        if not self.columns:
            return 0
        return len(self.data[self.columns[0]])


def _format_value(v: float, integral: bool) -> str:
    if math.isnan(v):
        return MISSING
    if integral and v == int(v) and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(float(v))


def write_text(path: str | Path, table: Table, delimiter: str = ",") -> None:
    cols = [np.asarray(table.data[c], dtype=np.float64) for c in table.columns]
    integral = []
    for a in cols:
        finite = a[~np.isnan(a)]
        negzero = np.any((finite == 0) & np.signbit(finite))
        integral.append(bool(np.all(finite == np.round(finite))) and not negzero)
    with open(path, "w", newline="\n") as fh:
        for line in table.comments:
            fh.write(f"# {line}\n")
        fh.write(delimiter.join(table.columns) + "\n")
        fmt = [(_format_value, flag) for flag in integral]
        for row in zip(*(a.tolist() for a in cols)):
            fh.write(delimiter.join(f(v, flag) for (f, flag), v in zip(fmt, row)))
            fh.write("\n")


def read_text(path: str | Path, delimiter: str = ",") -> Table:
    comments: list[str] = []
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if header is None and line.startswith("#"):
                comments.append(line[1:].strip())
                continue
            parts = [p.strip() for p in line.split(delimiter)]
            if header is None:
                header = parts
                if len(set(header)) != len(header):
                    raise FormatError("duplicate column names", lineno)
                continue
            if len(parts) != len(header):
                raise FormatError(
                    f"expected {len(header)} fields, found {len(parts)}", lineno)
            row = []
            for name, tok in zip(header, parts):
                if tok == MISSING:
                    row.append(math.nan)
                    continue
                try:
                    row.append(float(tok))
                except ValueError:
                    raise FormatError(
                        f"column {name!r}: cannot parse {tok!r}", lineno) from None
            rows.append(row)
    if header is None:
        raise FormatError("missing header line")
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    data = {name: np.ascontiguousarray(arr[:, j]) for j, name in enumerate(header)}
    return Table(header, data, comments)


def write_binary(path: str | Path, table: Table) -> None:
    meta = json.dumps({"columns": table.columns,
                       "comments": table.comments}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BI", VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<Q", table.nrows))
        for c in table.columns:
            fh.write(np.asarray(table.data[c], dtype="<f8").tobytes())


def read_binary(path: str | Path) -> Table:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError("not an ALSC binary file")
    try:
        version, meta_len = struct.unpack_from("<BI", raw, 4)
        if version != VERSION:
            raise FormatError(f"unsupported ALSC version {version}")
        off = 9
        meta = json.loads(raw[off:off + meta_len].decode("utf-8"))
        off += meta_len
        (nrows,) = struct.unpack_from("<Q", raw, off)
        off += 8
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt ALSC header: {exc}") from None
    columns = list(meta["columns"])
    if len(raw) != off + 8 * nrows * len(columns):
        raise FormatError("ALSC payload size does not match header")
    data = {}
    for c in columns:
        data[c] = np.frombuffer(raw, dtype="<f8", count=nrows, offset=off).astype(np.float64)
        off += 8 * nrows
    return Table(columns, data, list(meta.get("comments", [])))


def is_binary(path: str | Path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_table(path: str | Path) -> Table:
    """Read either format, sniffing the magic bytes."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return read_binary(path) if is_binary(path) else read_text(path)


def write_table(path: str | Path, table: Table, binary: bool | None = None) -> None:
    """Write ``table``; format follows ``binary`` or the ``.alsc`` suffix."""
    if binary is None:
        binary = str(path).endswith(".alsc")
    (write_binary if binary else write_text)(path, table)
