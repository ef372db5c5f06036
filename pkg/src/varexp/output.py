"""CSV, SVG and plain-text emission of run results."""
from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np

from .driver import DiagnosticsRecord, RunResult

COLUMNS = DiagnosticsRecord.CSV_COLUMNS


class OutputError(OSError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    if isinstance(x, (tuple, list)):
        return " ".join(fmt(v) for v in x)
    return str(x)


def header_items(result: RunResult) -> list:
    """Flat (key, value) pairs: config, constants, certificates, termination."""
    items = [(f"config.{k}", v) for k, v in result.config.items()]
    items += [(f"constants.{k}", v) for k, v in result.constants.as_dict().items()]
    items += [(f"constants.note.{k}", v) for k, v in result.constants.notes.items()]
    a = result.admissibility
    items += [(f"admissibility.{k}", getattr(a, k)) for k in
              ("p1", "p2", "q1", "q2", "sigma", "ordering_ok", "sobolev_ok", "sigma_ok")]
    items += [(f"blowup.{k}", v) for k, v in result.blowup.fields().items()]
    if result.decay is not None:
        items += [(f"decay.{k}", v) for k, v in result.decay.fields().items()]
    items += [(k, v) for k, v in result.notes.items()]
    term = result.termination
    items += [("termination.status", term.status), ("termination.t", term.t),
              ("termination.maxabs", term.maxabs)]
    if term.message:
        items.append(("termination.message", term.message))
    return items


def _write(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def csv_text(result: RunResult) -> str:
    buf = io.StringIO()
    for k, v in header_items(result):
        buf.write(f"# {k}={fmt(v)}\n")
    buf.write(",".join(COLUMNS) + "\n")
    for rec in result.records:
        buf.write(",".join(fmt(v) for v in rec.row()) + "\n")
    return buf.getvalue()


def emit_csv(result: RunResult, path):
    _write(path, csv_text(result))


def read_csv(path):
    """Parse an emitted CSV back into (header dict, list of row dicts)."""
    header, rows, cols = {}, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                k, _, v = line[2:].partition("=")
                header[k] = v
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append({c: (float(s) if s else None) for c, s in zip(cols, line.split(","))})
    return header, rows


def write_table(path, columns, rows):
    """Plain CSV with a header row; None becomes an empty field."""
    lines = [",".join(columns)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    _write(path, "\n".join(lines) + "\n")


def report_text(result: RunResult) -> str:
    return "".join(f"{k} = {fmt(v)}\n" for k, v in header_items(result))


# --- SVG -------------------------------------------------------------------

def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw))
    start = math.ceil(lo / step - 1e-9) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def plot_svg(series: dict, xlabel="t", ylabel="", title="", width=640, height=420) -> str:
    """Line plot of named (x, y) series; returns the SVG document."""
    colors = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad")
    xs = np.concatenate([np.asarray(s[0], float) for s in series.values()])
    ys = np.concatenate([np.asarray(s[1], float) for s in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) if y1 > y0 else max(abs(y0) * 0.05, 1e-3)
    y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<g font-family="sans-serif" font-size="11" fill="black">']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        if x0 - 1e-12 <= t <= x1 + 1e-12:
            out.append(f'<line x1="{X(t):.2f}" y1="{mt + ph}" x2="{X(t):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{ml - 5}" y1="{Y(t):.2f}" x2="{ml}" y2="{Y(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{Y(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, (name, (sx, sy)) in enumerate(series.items()):
        col = colors[i % len(colors)]
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(sx, sy))
        dash = ' stroke-dasharray="6,4"' if i else ""
        out.append(f'<polyline class="series" data-name="{name}" points="{pts}" fill="none" '
                   f'stroke="{col}" stroke-width="1.8"{dash}/>')
        ly = mt + 16 + 16 * i
        out.append(f'<line x1="{ml + pw - 130}" y1="{ly}" x2="{ml + pw - 105}" y2="{ly}" '
                   f'stroke="{col}" stroke-width="1.8"{dash}/>')
        out.append(f'<text x="{ml + pw - 100}" y="{ly + 4}">{name}</text>')
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)


def norm_series(result: RunResult, series=("h01", "delta")) -> dict:
    out = {}
    for key in series:
        pts = [(r.t, getattr(r, key)) for r in result.records if getattr(r, key) is not None]
        if pts:
            out[key] = ([a for a, _ in pts], [b for _, b in pts])
    return out


def emit_svg(result: RunResult, path, series=("h01", "delta")):
    if not result.records:
        raise ValueError("no records to plot")
    data = norm_series(result, series)
    labels = {"h01": "||u||_H1_0", "delta": "envelope"}
    data = {labels.get(k, k): v for k, v in data.items()}
    _write(path, plot_svg(data, "t", "norm", "H1_0 norm and decay envelope"))


def snapshot_svg(mesh, values, title="", size=480) -> str:
    """Grayscale map of a nodal field: one polygon per triangle, shaded by its mean value."""
    vals = np.asarray(values, float)
    tri_mean = vals[mesh.triangles].mean(axis=1)
    lo, hi = float(tri_mean.min()), float(tri_mean.max())
    span = hi - lo if hi > lo else 1.0
    level = np.clip((tri_mean - lo) / span, 0.0, 1.0)
    r = mesh.rect
    scale = (size - 20) / max(r.xmax - r.xmin, r.ymax - r.ymin)
    px = 10 + (mesh.vertices[:, 0] - r.xmin) * scale
    py = 10 + (r.ymax - mesh.vertices[:, 1]) * scale
    w = 20 + (r.xmax - r.xmin) * scale
    h = 30 + (r.ymax - r.ymin) * scale
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0f}" '
           f'height="{h:.0f}" viewBox="0 0 {w:.1f} {h:.1f}">',
           f"<title>{title}</title>",
           '<g stroke="none">']
    for t, (i, j, k) in enumerate(mesh.triangles):
        g = int(round(255 * level[t]))
        out.append(f'<polygon points="{px[i]:.2f},{py[i]:.2f} {px[j]:.2f},{py[j]:.2f} '
                   f'{px[k]:.2f},{py[k]:.2f}" fill="rgb({g},{g},{g})"/>')
    out.append("</g>")
    out.append(f'<text x="10" y="{h - 8:.1f}" font-family="sans-serif" font-size="11">'
               f"{title} min={lo:.4g} max={hi:.4g}</text>")
    out += ["</svg>", ""]
    return "\n".join(out)


def emit_snapshots(result: RunResult, prefix) -> list:
    paths = []
    for t in sorted(result.snapshots):
        path = Path(f"{prefix}_t{t:.4g}.svg")
        _write(path, snapshot_svg(result.problem.mesh, result.snapshots[t], f"u at t={t:.4g}"))
        paths.append(path)
    return paths
