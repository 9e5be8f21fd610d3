"""Report emission: canonical JSON, per-series CSV, SVG line plots, PNG figures.

File names are content-addressed by a hash of the run configuration, so
repeated runs with the same configuration overwrite their own artifacts and
never collide with other runs. All writes go through a temp file plus rename.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import __version__

Series = dict[str, tuple[tuple[float, float], ...]]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:12]


def atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_series_csv(path: Path, points) -> None:
    lines = ["eps,value"] + [f"{x!r},{y!r}" for x, y in points]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _svg_coords(points, x_range, y_range, box):
    x0, y0, w, h = box
    (xa, xb), (ya, yb) = x_range, y_range
    out = []
    for x, y in points:
        px = x0 + (x - xa) / (xb - xa) * w if xb > xa else x0 + w / 2
        py = y0 + h - (y - ya) / (yb - ya) * h if yb > ya else y0 + h / 2
        out.append(f"{px:.2f},{py:.2f}")
    return " ".join(out)


def render_svg_lineplot(path: Path, series: Series, title: str = "") -> None:
    """Minimal standalone SVG: axes box plus one polyline per series."""
    width, height = 640, 420
    box = (70, 40, width - 110, height - 100)
    pts_all = [p for pts in series.values() for p in pts]
    if not pts_all:
        pts_all = [(0.0, 0.0), (1.0, 1.0)]
    xs = [p[0] for p in pts_all]
    ys = [p[1] for p in pts_all]
    pad = lambda a, b: ((a - 0.05 * (b - a or 1.0)), (b + 0.05 * (b - a or 1.0)))
    x_range, y_range = pad(min(xs), max(xs)), pad(min(ys), max(ys))
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{box[0]}" y="{box[1]}" width="{box[2]}" height="{box[3]}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="15">{title}</text>')
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = palette[i % len(palette)]
        coords = _svg_coords(pts, x_range, y_range, box)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(
            f'<text x="{box[0] + 8}" y="{box[1] + 18 + 16 * i}" font-size="12" fill="{color}">{name}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        xv = x_range[0] + frac * (x_range[1] - x_range[0])
        yv = y_range[0] + frac * (y_range[1] - y_range[0])
        px = box[0] + frac * box[2]
        py = box[1] + box[3] - frac * box[3]
        parts.append(f'<text x="{px:.0f}" y="{box[1] + box[3] + 18}" text-anchor="middle" font-size="11">{xv:.4g}</text>')
        parts.append(f'<text x="{box[0] - 8}" y="{py + 4:.0f}" text-anchor="end" font-size="11">{yv:.4g}</text>')
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")


def render_png_lineplot(path: Path, series: Series, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    for name, pts in sorted(series.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3, label=name)
    if all(x > 0 for pts in series.values() for x, _ in pts) and len(series) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    if series:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (int, str, bool)) or obj is None:
        return obj
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return str(obj)


def emit_report(
    name: str,
    outdir: str | Path,
    config: dict,
    results: dict,
    series: Series | None = None,
    seeds=(0,),
    runtime_s: float = 0.0,
) -> dict[str, str]:
    """Write <name>-<hash>.json plus one CSV per series, an SVG, and a PNG.

    The JSON embeds the configuration, seeds, and code version; keys are
    canonically ordered so identical configurations yield identical bytes
    except for the runtime field.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = _jsonable(config)
    h = config_hash(cfg)
    base = f"{name}-{h}"
    series = series or {}
    doc = {
        "name": name,
        "config": cfg,
        "seeds": _jsonable(list(seeds)),
        "version": __version__,
        "results": _jsonable(results),
        "series": _jsonable({k: [list(p) for p in pts] for k, pts in series.items()}),
        "runtime_s": float(runtime_s),
    }
    paths = {}
    json_path = outdir / f"{base}.json"
    atomic_write_text(json_path, canonical_json(doc) + "\n")
    paths["json"] = str(json_path)
    for key, pts in series.items():
        csv_path = outdir / f"{base}-{key}.csv"
        write_series_csv(csv_path, pts)
        paths[f"csv:{key}"] = str(csv_path)
    if series:
        svg_path = outdir / f"{base}.svg"
        render_svg_lineplot(svg_path, series, title=name)
        paths["svg"] = str(svg_path)
        png_path = outdir / f"{base}.png"
        render_png_lineplot(png_path, series, title=name)
        paths["png"] = str(png_path)
    return paths


def load_report(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    return json.loads(path.read_text(encoding="utf-8"))
