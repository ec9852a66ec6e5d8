"""Result files: CSV tables, JSON manifests and static SVG plots."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

SIG_DIGITS = 12


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)) or hasattr(v, "dtype"):
        x = float(v)
        if math.isnan(x):
            return "nan"
        return f"{x:.{SIG_DIGITS}g}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def emit_csv(path, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Write the table; returns its sha256."""
    text = csv_text(columns, rows)
    data = text.encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _parse(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path) -> Dict[str, list]:
    """Columns of a result CSV; numeric cells become floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        cols: Dict[str, list] = {h: [] for h in header}
        for row in rd:
            for h, cell in zip(header, row):
                cols[h].append(_parse(cell))
    return cols


def emit_json_manifest(path, manifest: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")


# --- SVG -----------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")
STEP_COLUMNS = ("survival", "tail", "witness", "empirical_cdf")


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def svg_plot(x: Sequence[float], series: Dict[str, Sequence[float]], logy: bool = False,
             title: str = "", xlabel: str = "", steps: Optional[Sequence[str]] = None,
             width: int = 640, height: int = 420) -> str:
    """Line (or step) plot of several series against x as an SVG document."""
    steps = set(steps or ())
    left, right, top, bottom = 70, 160, 40, 50
    pw, ph = width - left - right, height - top - bottom
    pts = {}
    for name, ys in series.items():
        keep = [(float(a), float(b)) for a, b in zip(x, ys)
                if isinstance(b, (int, float)) and math.isfinite(b) and math.isfinite(a)
                and (b > 0 or not logy)]
        if keep:
            pts[name] = keep
    xs = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ys = [p[1] for v in pts.values() for p in v] or ([1.0, 10.0] if logy else [0.0, 1.0])
    fy = (lambda v: math.log10(v)) if logy else (lambda v: v)
    x0, x1 = min(xs), max(xs)
    y0, y1 = fy(min(ys)), fy(max(ys))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1.0 - (fy(v) - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{top - 14}" text-anchor="middle">{_esc(title)}</text>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    if logy:
        yt = [10.0 ** k for k in range(math.floor(y0), math.ceil(y1) + 1) if y0 <= k <= y1]
    else:
        yt = _ticks(y0, y1)
    for t in yt:
        yy = top + (1.0 - ((math.log10(t) if logy else t) - y0) / (y1 - y0)) * ph
        out.append(f'<line x1="{left - 5}" y1="{yy:.2f}" x2="{left}" y2="{yy:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{yy + 4:.2f}" text-anchor="end">{t:g}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    for k, (name, p) in enumerate(pts.items()):
        color = PALETTE[k % len(PALETTE)]
        coords = []
        for j, (a, b) in enumerate(p):
            if name in steps and j > 0:
                coords.append(f"{px(a):.2f},{py(p[j - 1][1]):.2f}")
            coords.append(f"{px(a):.2f},{py(b):.2f}")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(coords)}"/>')
        ly = top + 16 * (k + 1)
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_svg_plot(path, x, series, logy: bool = False, title: str = "", xlabel: str = "",
                  steps=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg_plot(x, series, logy=logy, title=title, xlabel=xlabel, steps=steps),
                    encoding="utf-8")


def plot_csv(csv_path, svg_path, logy: bool = False) -> List[str]:
    """Plot every numeric column of a result CSV against its first column.
    Standard-error and count columns are left out.  Returns the plotted column names."""
    cols = read_csv(csv_path)
    names = list(cols)
    if not names:
        raise ValueError(f"{csv_path}: no columns")
    x = cols[names[0]]
    if any(not isinstance(v, float) for v in x):
        raise ValueError(f"{csv_path}: first column must be numeric")
    series = {n: cols[n] for n in names[1:]
              if "stderr" not in n and n != "count" and cols[n]
              and all(isinstance(v, float) for v in cols[n])}
    steps = [n for n in series if n in STEP_COLUMNS]
    emit_svg_plot(svg_path, x, series, logy=logy, title=Path(csv_path).stem, xlabel=names[0],
                  steps=steps)
    return list(series)
