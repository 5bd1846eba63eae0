"""Artifact formats: the FONS binary field container, CSV tables and JSON reports.

Container layout (little-endian)::

    magic    4 bytes  b"FONS"
    version  u16
    d        u16
    n        u32
    comps    u16
    time     i64      (-2**63 when the field carries no time index)
    samples  f64 * comps * n**d, row-major over axes, component fastest
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .grid import Field, PeriodicGrid

MAGIC = b"FONS"
VERSION = 1
_HEADER = struct.Struct("<4sHHIHq")
_NO_TIME = -(2**63)


class FormatError(ValueError):
    pass


def field_to_bytes(f: Field) -> bytes:
    t = _NO_TIME if f.time_index is None else int(f.time_index)
    head = _HEADER.pack(MAGIC, VERSION, f.grid.d, f.grid.n, f.components, t)
    body = np.moveaxis(f.samples, 0, -1).astype("<f8", copy=False)
    return head + np.ascontiguousarray(body).tobytes()


def field_from_bytes(buf: bytes) -> Field:
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, d, n, comps, t = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError("bad magic bytes")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    grid = PeriodicGrid(d, n)
    count = comps * grid.size
    body = buf[_HEADER.size:]
    if len(body) != 8 * count:
        raise FormatError(f"expected {count} samples, found {len(body) // 8}")
    arr = np.frombuffer(body, dtype="<f8").reshape(grid.shape + (comps,))
    return Field(grid, np.moveaxis(arr, -1, 0).astype(np.float64),
                 None if t == _NO_TIME else t)


def write_field(path, f: Field) -> None:
    Path(path).write_bytes(field_to_bytes(f))


def read_field(path) -> Field:
    return field_from_bytes(Path(path).read_bytes())


def field_to_csv(f: Field) -> str:
    """Debug export: one row per node, index coordinates then component values."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    d = f.grid.d
    w.writerow([f"i{a}" for a in range(d)] + [f"c{c}" for c in range(f.components)])
    idx = np.indices(f.grid.shape).reshape(d, -1).T
    vals = f.samples.reshape(f.components, -1).T
    for i, v in zip(idx, vals):
        w.writerow([int(x) for x in i] + [fmt(x) for x in v])
    return out.getvalue()


def fmt(x) -> str:
    """Full 17-significant-digit decimal form."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x
                        for x in row])


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float in 17-significant-digit form.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    return _dump(obj, indent, 0) + "\n"


def _dump(obj, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return '"' + fmt(x) + '"'
        return fmt(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_dump(str(k), indent, level + 1)}: {_dump(v, indent, level + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, np.number, str, type(None))) for x in obj):
            return "[" + ", ".join(_dump(x, indent, level + 1) for x in obj) + "]"
        items = [pad + _dump(x, indent, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "to_dict"):
        return _dump(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))

