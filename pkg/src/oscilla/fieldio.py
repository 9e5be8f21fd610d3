"""Reading and writing sampled fields: CSV for 1D/2D, PGM (P2/P5) for 2D images.

CSV keeps full float precision and the domain geometry, so roundtrips are
exact. PGM quantizes linearly to 8 or 16 bits; the scale (value min/max) and
the domain box go into a JSON sidecar next to the image so reading restores
values up to quantization.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import BoxDomain, ScalarField

_CSV_2D_HEADER = "rows,cols,lx,ly,ux,uy"


def write_field_csv(u: ScalarField, path: str | Path) -> Path:
    path = Path(path)
    if u.domain.dim == 1:
        xs = u.cell_centers(0)
        lines = ["x,value"]
        lines += [f"{float(x)!r},{float(v)!r}" for x, v in zip(xs, np.asarray(u.samples))]
    elif u.domain.dim == 2:
        rows, cols = u.resolution
        lo, up = u.domain.lower, u.domain.upper
        lines = [_CSV_2D_HEADER, f"{rows},{cols},{float(lo[0])!r},{float(lo[1])!r},{float(up[0])!r},{float(up[1])!r}"]
        lines += [",".join(repr(float(v)) for v in row) for row in np.asarray(u.samples)]
    else:
        raise ValueError("CSV fields support 1D and 2D only")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_field_csv(path: str | Path) -> ScalarField:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty field file")
    head = lines[0].replace(" ", "")
    if head == "x,value":
        xs, vals = [], []
        for ln in lines[1:]:
            a, b = ln.split(",")
            xs.append(float(a))
            vals.append(float(b))
        xs = np.asarray(xs)
        if xs.size < 2:
            raise ValueError(f"{path}: need at least two samples")
        h = float(np.diff(xs).mean())
        if not np.allclose(np.diff(xs), h, rtol=0, atol=1e-9 * max(abs(h), 1.0)):
            raise ValueError(f"{path}: sample positions not uniform")
        dom = BoxDomain((float(xs[0] - h / 2),), (float(xs[-1] + h / 2),))
        return ScalarField(dom, np.asarray(vals))
    if head == _CSV_2D_HEADER:
        meta = lines[1].split(",")
        rows, cols = int(meta[0]), int(meta[1])
        lx, ly, ux, uy = (float(v) for v in meta[2:6])
        data = [[float(v) for v in ln.split(",")] for ln in lines[2 : 2 + rows]]
        arr = np.asarray(data)
        if arr.shape != (rows, cols):
            raise ValueError(f"{path}: expected {rows}x{cols} values, got {arr.shape}")
        return ScalarField(BoxDomain((lx, ly), (ux, uy)), arr)
    raise ValueError(f"{path}: unrecognized field CSV header {lines[0]!r}")


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_pgm(u: ScalarField, path: str | Path, bits: int = 16, binary: bool = True) -> Path:
    """Quantize linearly to the PGM range; scale and domain go to a JSON sidecar."""
    if u.domain.dim != 2:
        raise ValueError("PGM supports 2D fields only")
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    path = Path(path)
    arr = np.asarray(u.samples, dtype=float)
    vmin, vmax = float(arr.min()), float(arr.max())
    maxval = (1 << bits) - 1
    span = vmax - vmin
    quant = np.zeros(arr.shape, dtype=np.uint32) if span == 0 else np.rint(
        (arr - vmin) / span * maxval
    ).astype(np.uint32)
    rows, cols = arr.shape
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{cols} {rows}\n{maxval}\n"
    if binary:
        payload = quant.astype(">u2" if bits == 16 else "u1").tobytes()
        path.write_bytes(header.encode("ascii") + payload)
    else:
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in quant)
        path.write_text(header + body + "\n", encoding="ascii")
    sidecar = {
        "min": vmin,
        "max": vmax,
        "bits": bits,
        "domain": {"lower": list(u.domain.lower), "upper": list(u.domain.upper)},
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def _parse_pgm_tokens(data: bytes):
    # tokens separated by whitespace; '#' starts a comment that runs to end of line
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def read_pgm(path: str | Path) -> ScalarField:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    data = path.read_bytes()
    magic, pos = _parse_pgm_tokens(data)
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM (P2/P5) file")
    fields = []
    for _ in range(3):
        tok, consumed = _parse_pgm_tokens(data[pos:])
        fields.append(int(tok))
        pos += consumed
    cols, rows, maxval = fields
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        quant = np.frombuffer(data[pos:], dtype=dtype, count=rows * cols).reshape(rows, cols)
    else:
        vals = data[pos:].split()
        quant = np.asarray([int(v) for v in vals[: rows * cols]]).reshape(rows, cols)
    side = _sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        vmin, vmax = float(meta["min"]), float(meta["max"])
        dom = BoxDomain(tuple(meta["domain"]["lower"]), tuple(meta["domain"]["upper"]))
    else:
        vmin, vmax = 0.0, 1.0
        dom = BoxDomain((0.0, 0.0), (1.0, 1.0))
    arr = vmin + quant.astype(float) / maxval * (vmax - vmin)
    return ScalarField(dom, arr)


def read_field(path: str | Path) -> ScalarField:
    """Dispatch on extension: .pgm images, anything else as field CSV."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_field_csv(path)
