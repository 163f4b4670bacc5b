"""Binary field dumps and kernel sidecar metadata.

Dump layout (all little-endian):

    magic   4 bytes  b"LLAP"
    version u32      currently 1
    d       u32
    n       u32
    L       f64
    payload n^d f64  row-major samples

A kernel stored on disk is a field dump plus a sidecar text file of
``key = value`` lines carrying the family tag and its parameters.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import GridSpec, RealField, make_grid

MAGIC = b"LLAP"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")

__all__ = [
    "MAGIC",
    "VERSION",
    "dump_field",
    "load_field",
    "dump_sidecar",
    "load_sidecar",
    "atomic_write_bytes",
    "atomic_write_text",
]


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_field(f: RealField, path: str | Path) -> None:
    g = f.grid
    header = _HEADER.pack(MAGIC, VERSION, g.d, g.n, g.L)
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    atomic_write_bytes(path, header + payload)


def load_field(path: str | Path) -> RealField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated field dump")
    magic, version, d, n, L = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    grid = make_grid(d, L, n)
    expected = _HEADER.size + 8 * grid.npoints
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(grid.shape)
    return RealField(values.astype(float), grid)


def dump_sidecar(path: str | Path, family: str, params: dict[str, float]) -> None:
    lines = [f"family = {family}"]
    for key in sorted(params):
        lines.append(f"{key} = {params[key]!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_sidecar(path: str | Path) -> tuple[str, dict[str, float]]:
    family = None
    params: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "family":
            family = value
        else:
            try:
                params[key] = float(value)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: non-numeric value for {key!r}") from e
    if family is None:
        raise ValueError(f"{path}: sidecar is missing the family tag")
    return family, params


def grid_matches(f: RealField, grid: GridSpec) -> bool:
    return f.grid == grid
