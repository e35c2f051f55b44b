"""File formats: PBM/PGM snapshots, CSV tables, key=value run configs.

Cell sets travel as plain PBM (P4), row-major with cell (0, 0) at the
top-left and occupied cells stored as 1 bits. Scalar fields travel either
as 16-bit big-endian PGM (P5) with the affine decoding recorded in a
header comment, or as a lossless CSV of (i, j, value) rows printed with
17 significant digits. Every CSV starts with the comment "# schema=1".
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import PeriodicGrid, ScalarField, TorusSet

CSV_SCHEMA_LINE = "# schema=1"


def write_pbm(path: str | Path, s: TorusSet) -> None:
    occ = s.occupancy
    header = f"P4\n{s.grid.nx} {s.grid.ny}\n".encode("ascii")
    packed = np.packbits(occ.astype(np.uint8), axis=1)
    Path(path).write_bytes(header + packed.tobytes())


def _read_pnm_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Parse `count` whitespace-separated header integers after the magic,
    skipping # comments; returns (values, offset past the final separator)."""
    vals: list[int] = []
    i = 2  # past the 2-byte magic
    n = len(buf)
    while len(vals) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i] == ord("#"):
            while i < n and buf[i] != ord("\n"):
                i += 1
            continue
        j = i
        while j < n and not buf[j:j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError("truncated netpbm header")
        vals.append(int(buf[i:j]))
        i = j
    if i >= n or not buf[i:i + 1].isspace():
        raise ValueError("malformed netpbm header")
    return vals, i + 1


def read_pbm(path: str | Path) -> TorusSet:
    buf = Path(path).read_bytes()
    if buf[:2] != b"P4":
        raise ValueError(f"{path}: not a binary PBM (P4) file")
    (nx, ny), off = _read_pnm_tokens(buf, 2)
    row_bytes = (nx + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8, count=ny * row_bytes, offset=off)
    bits = np.unpackbits(raw.reshape(ny, row_bytes), axis=1)[:, :nx]
    return TorusSet(PeriodicGrid(nx, ny), bits.astype(bool))


def write_pgm16(path: str | Path, field: ScalarField) -> None:
    """16-bit PGM with "# affine <offset> <scale>": value = offset + scale*code."""
    vals = field.values
    lo = float(vals.min())
    hi = float(vals.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 0.0
    code = (np.rint((vals - lo) / scale).astype(np.uint16) if scale > 0
            else np.zeros(vals.shape, dtype=np.uint16))
    header = (f"P5\n# affine {lo:.17g} {scale:.17g}\n"
              f"{field.grid.nx} {field.grid.ny}\n65535\n").encode("ascii")
    Path(path).write_bytes(header + code.astype(">u2").tobytes())


def read_pgm16(path: str | Path) -> ScalarField:
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    offset, scale = 0.0, 1.0
    for line in buf.split(b"\n", 8):
        if line.startswith(b"# affine "):
            parts = line.decode("ascii").split()
            offset, scale = float(parts[2]), float(parts[3])
            break
    (nx, ny, maxval), off = _read_pnm_tokens(buf, 3)
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM, maxval={maxval}")
    code = np.frombuffer(buf, dtype=">u2", count=nx * ny, offset=off)
    vals = offset + scale * code.reshape(ny, nx).astype(np.float64)
    return ScalarField(PeriodicGrid(nx, ny), vals)


def write_field_csv(path: str | Path, field: ScalarField) -> None:
    """Exact round-trip export: one (i, j, value) row per cell."""
    out = io.StringIO()
    out.write(CSV_SCHEMA_LINE + "\n")
    out.write("i,j,value\n")
    vals = field.values
    for j in range(field.grid.ny):
        for i in range(field.grid.nx):
            out.write(f"{i},{j},{vals[j, i]:.17g}\n")
    Path(path).write_text(out.getvalue())


def read_field_csv(path: str | Path) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2,
                      dtype=np.float64, ndmin=2)
    ii = data[:, 0].astype(np.int64)
    jj = data[:, 1].astype(np.int64)
    nx, ny = int(ii.max()) + 1, int(jj.max()) + 1
    vals = np.empty((ny, nx))
    vals[jj, ii] = data[:, 2]
    return ScalarField(PeriodicGrid(nx, ny), vals)


def write_csv(path: str | Path, columns: Sequence[str],
              rows: Iterable[Sequence[object]]) -> None:
    """Versioned CSV: schema comment, header row, then %.17g-printed cells."""
    out = io.StringIO()
    out.write(CSV_SCHEMA_LINE + "\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append(f"{v:.17g}")
            else:
                cells.append(str(v))
        out.write(",".join(cells) + "\n")
    Path(path).write_text(out.getvalue())


def parse_config(text: str) -> dict[str, str]:
    """Flat key=value lines; # comments and blank lines ignored.
    Later duplicates win, matching the command-line override rule."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config(Path(path).read_text())
