"""Flat-file formats: CSV tables, JSON manifests and the BNDF/HUSG binaries.

Binary layouts (all little endian)::

    BNDF  magic, u32 version, u32 count, then per state
          f64 k, u32 n, n x f64 s, n x f64 u
    HUSG  magic, u32 version, u32 nq, u32 np, f64 epsilon, f64 k,
          nq*np x f64 values (row-major, q index slowest)
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError

BNDF_MAGIC = b"BNDF"
HUSG_MAGIC = b"HUSG"
FORMAT_VERSION = 1


def atomic_write(path, data: bytes) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
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
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, obj) -> Path:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    return atomic_write(path, (text + "\n").encode())


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return atomic_write(path, buf.getvalue().encode())


def read_csv(path):
    """Rows as dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# level lists
def write_levels(path, window) -> Path:
    rows = [(i, k, window.method, int(wid)) for i, (k, wid) in enumerate(zip(window.levels, window.window_ids))]
    return write_csv(path, ["index", "k", "method", "window_id"], rows)


def read_levels(path, epsilon: float, k_lo: float | None = None, k_hi: float | None = None):
    from .eigensolver.types import SpectrumWindow

    rows = read_csv(path)
    k = np.array([float(r["k"]) for r in rows])
    ids = np.array([int(r["window_id"]) for r in rows], dtype=int)
    method = rows[0]["method"] if rows else "scaling"
    lo = k_lo if k_lo is not None else (float(k.min()) if k.size else 0.0)
    hi = k_hi if k_hi is not None else (float(k.max()) if k.size else 0.0)
    return SpectrumWindow(epsilon, lo, hi, k, method, window_ids=ids)


# boundary functions
def write_bndf(path, functions) -> Path:
    parts = [BNDF_MAGIC, struct.pack("<II", FORMAT_VERSION, len(functions))]
    for bf in functions:
        parts.append(struct.pack("<dI", float(bf.k), bf.s.size))
        parts.append(np.asarray(bf.s, dtype="<f8").tobytes())
        parts.append(np.asarray(bf.u, dtype="<f8").tobytes())
    return atomic_write(path, b"".join(parts))


def read_bndf(path, epsilon: float = 0.0):
    from .eigensolver.types import BoundaryFunction

    data = Path(path).read_bytes()
    if data[:4] != BNDF_MAGIC:
        raise InputError(f"{path}: not a BNDF file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported BNDF version {version}")
    off = 12
    out = []
    for _ in range(count):
        k, n = struct.unpack_from("<dI", data, off)
        off += 12
        s = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
        off += 8 * n
        u = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
        off += 8 * n
        out.append(BoundaryFunction(k=k, s=s, u=u, epsilon=epsilon))
    if off != len(data):
        raise InputError(f"{path}: trailing bytes in BNDF file")
    return out


# husimi grids
def write_husg(path, grid) -> Path:
    head = HUSG_MAGIC + struct.pack("<IIIdd", FORMAT_VERSION, grid.nq, grid.np, grid.epsilon, grid.k)
    return atomic_write(path, head + np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def read_husg(path):
    from .husimi import HusimiGrid

    data = Path(path).read_bytes()
    if data[:4] != HUSG_MAGIC:
        raise InputError(f"{path}: not a HUSG file")
    version, nq, np_, eps, k = struct.unpack_from("<IIIdd", data, 4)
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported HUSG version {version}")
    off = 4 + struct.calcsize("<IIIdd")
    vals = np.frombuffer(data, dtype="<f8", count=nq * np_, offset=off).astype(float).reshape(nq, np_)
    return HusimiGrid(epsilon=eps, k=k, values=vals)
