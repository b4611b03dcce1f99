"""Small hand-written SVG charts.

Output depends only on the input numbers (fixed formatting, no
timestamps), so identical inputs give byte-identical files.
"""
from __future__ import annotations

import numpy as np

W, H, PAD = 480, 480, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str, w: int = W, h: int = H) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_escape(title)}</text>',
    ]


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) * (b - a) / span


def _axes(xlo, xhi, ylo, yhi, xlabel="", ylabel="") -> list:
    out = [f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
           f'fill="none" stroke="#444"/>']
    for v, x in ((xlo, PAD), (xhi, W - PAD)):
        out.append(f'<text x="{x}" y="{H - PAD + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{v:.3g}</text>')
    for v, y in ((ylo, H - PAD), (yhi, PAD)):
        out.append(f'<text x="{PAD - 4}" y="{y + 4}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{v:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12">{_escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{H // 2}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12" transform="rotate(-90 14 {H // 2})">{_escape(ylabel)}</text>')
    return out


def scatter_svg(series: dict, title: str = "", lim: float = 3.0) -> str:
    """2-D scatter of several named point sets on a square [-lim, lim] box."""
    sx = _scale(-lim, lim, PAD, W - PAD)
    sy = _scale(-lim, lim, H - PAD, PAD)
    out = _header(title) + _axes(-lim, lim, -lim, lim, "x0", "x1")
    for k, (name, pts) in enumerate(series.items()):
        pts = np.asarray(pts, dtype=float)
        pts = pts[np.all(np.abs(pts[:, :2]) <= lim, axis=1)]
        color = COLORS[k % len(COLORS)]
        out.append(f'<g fill="{color}" fill-opacity="0.35">')
        out += [f'<circle cx="{_f(x)}" cy="{_f(y)}" r="1.5"/>'
                for x, y in zip(sx(pts[:, 0]), sy(pts[:, 1]))]
        out.append("</g>")
        out.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 + 14 * k}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11" fill="{color}">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_svg(x, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
             log_x: bool = False) -> str:
    """Line chart of named y-series against a shared x."""
    x = np.asarray(x, dtype=float)
    xv = np.log10(x) if log_x else x
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    ylo, yhi = 0.0, float(finite.max()) * 1.1 if finite.size else 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    sx = _scale(float(xv.min()), float(xv.max()), PAD, W - PAD)
    sy = _scale(ylo, yhi, H - PAD, PAD)
    out = _header(title) + _axes(float(x.min()), float(x.max()), ylo, yhi, xlabel, ylabel)
    for k, (name, y) in enumerate(ys.items()):
        color = COLORS[k % len(COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(sx(xv[ok]), sy(y[ok])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        out += [f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3" fill="{color}"/>'
                for a, b in zip(sx(xv[ok]), sy(y[ok]))]
        out.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 + 14 * k}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11" fill="{color}">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram_svg(values, bins: int = 30, title: str = "", xlabel: str = "",
                  log_x: bool = True) -> str:
    """Histogram; with ``log_x`` the bins are equal in log10 of the value."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & ((v > 0) if log_x else True)]
    if v.size == 0:
        v = np.ones(1)
    data = np.log10(v) if log_x else v
    lo, hi = float(data.min()), float(data.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    top = max(int(counts.max()), 1)
    sx = _scale(lo, hi, PAD, W - PAD)
    sy = _scale(0.0, top, H - PAD, PAD)
    xl, xh = (10 ** lo, 10 ** hi) if log_x else (lo, hi)
    out = _header(title) + _axes(xl, xh, 0, top, xlabel + (" (log scale)" if log_x else ""), "count")
    out.append(f'<g fill="{COLORS[0]}" stroke="white" stroke-width="0.5">')
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = float(sx(a)), float(sx(b))
        y = float(sy(c))
        out.append(f'<rect x="{_f(x0)}" y="{_f(y)}" width="{_f(x1 - x0)}" '
                   f'height="{_f(H - PAD - y)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
