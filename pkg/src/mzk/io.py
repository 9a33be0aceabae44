"""Snapshot files, CSV tables and atomic JSON writes."""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import Field, Frame, GridSpec

MAGIC = b"MZKF"
VERSION = 1
_HEADER = struct.Struct("<4sHBIIddd")
_FRAME_CODES = {Frame.XY: 0, Frame.AB: 1}
_FRAME_FROM_CODE = {v: k for k, v in _FRAME_CODES.items()}


def encode_snapshot(fld: Field) -> bytes:
    spec = fld.grid
    header = _HEADER.pack(MAGIC, VERSION, _FRAME_CODES[fld.frame], spec.n_a, spec.n_b,
                          spec.len_a, spec.len_b, float(fld.time))
    return header + np.ascontiguousarray(fld.values, dtype="<f8").tobytes()


def decode_snapshot(blob: bytes, *, dealias_fraction: float = 1.0) -> Field:
    if len(blob) < _HEADER.size:
        raise ValueError("snapshot too short for header")
    magic, version, frame, n_a, n_b, len_a, len_b, time = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if frame not in _FRAME_FROM_CODE:
        raise ValueError(f"unknown frame code {frame}")
    expected = _HEADER.size + 8 * n_a * n_b
    if len(blob) != expected:
        raise ValueError(f"snapshot size {len(blob)} does not match header ({expected})")
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(n_a, n_b).astype(float)
    spec = GridSpec(n_a, n_b, len_a, len_b, dealias_fraction)
    return Field(spec, values, time, _FRAME_FROM_CODE[frame])


def write_snapshot(path, fld: Field) -> Path:
    path = Path(path)
    _atomic_write_bytes(path, encode_snapshot(fld))
    return path


def read_snapshot(path, **kw) -> Field:
    return decode_snapshot(Path(path).read_bytes(), **kw)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (Frame,)):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    _atomic_write_bytes(path, (dumps_json(obj) + "\n").encode())
    return path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: list[str], rows) -> Path:
    """RFC-4180 CSV; floats written with ``repr`` so values round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    os.replace(tmp, path)
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
