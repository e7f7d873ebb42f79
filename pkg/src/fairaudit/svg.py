"""Hand-written SVG: heatmaps for bound grids, line charts for experiment series.

Output is deterministic: no timestamps, no generated ids, fixed number
formatting. Coordinates are rounded to 0.01 px.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .experiments import SeriesPoint

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]

# Anchors of the sequential ramp (dark purple -> teal -> yellow); the 256
# steps are linear interpolations between consecutive anchors.
RAMP_ANCHORS = ["#440154", "#3b528b", "#21918c", "#5ec962", "#fde725"]
RAMP_STEPS = 256


def _hex(c: str) -> np.ndarray:
    return np.array([int(c[i : i + 2], 16) for i in (1, 3, 5)], dtype=float)


def _build_ramp() -> list[str]:
    anchors = np.array([_hex(c) for c in RAMP_ANCHORS])
    pos = np.linspace(0, len(anchors) - 1, RAMP_STEPS)
    out = []
    for p in pos:
        i = min(int(p), len(anchors) - 2)
        t = p - i
        rgb = np.rint(anchors[i] * (1 - t) + anchors[i + 1] * t).astype(int)
        out.append("#{:02x}{:02x}{:02x}".format(*rgb))
    return out


RAMP = _build_ramp()


def ramp_color(value: float, vmin: float, vmax: float) -> str:
    if vmax <= vmin:
        return RAMP[-1]
    t = (value - vmin) / (vmax - vmin)
    t = min(max(t, 0.0), 1.0)
    return RAMP[int(round(t * (RAMP_STEPS - 1)))]


def _num(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _esc(text: str) -> str:
    return (
        str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _text(x, y, s, size=12, anchor="middle", extra="") -> str:
    return (
        f'<text x="{_num(x)}" y="{_num(y)}" font-size="{size}" text-anchor="{anchor}" '
        f'font-family="sans-serif"{extra}>{_esc(s)}</text>'
    )


def heatmap_svg(
    grid,
    m_values: Sequence[float],
    n_values: Sequence[int],
    title: str = "",
    vmin: float | None = None,
    vmax: float | None = None,
    cell: float = 8.0,
) -> str:
    """Heatmap with ``m`` on the horizontal axis and ``n`` on the vertical one.

    ``grid[i][j]`` is the value at ``(m_values[i], n_values[j])``. Each cell
    carries its value in a ``data-c`` attribute. The colour scale spans
    ``[vmin, vmax]`` (data range by default) and is drawn as a bar on the right.
    """
    g = np.asarray(grid, dtype=float)
    vmin = float(g.min()) if vmin is None else vmin
    vmax = float(g.max()) if vmax is None else vmax
    nm, nn = g.shape
    left, top, right_pad, bottom = 70.0, 40.0, 110.0, 50.0
    w, h = nm * cell, nn * cell
    W, H = left + w + right_pad, top + h + bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(W)}" height="{_num(H)}" viewBox="0 0 {_num(W)} {_num(H)}">',
        f'<rect x="0" y="0" width="{_num(W)}" height="{_num(H)}" fill="white"/>',
    ]
    if title:
        parts.append(_text(left + w / 2, 22, title, 14))
    for i in range(nm):
        for j in range(nn):
            x = left + i * cell
            y = top + h - (j + 1) * cell  # small n at the bottom
            v = g[i, j]
            parts.append(
                f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cell)}" height="{_num(cell)}" '
                f'fill="{ramp_color(v, vmin, vmax)}" data-m="{_num(m_values[i])}" data-n="{int(n_values[j])}" '
                f'data-c="{v:.10g}"/>'
            )
    # axes
    parts.append(f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(w)}" height="{_num(h)}" fill="none" stroke="black"/>')
    for i in sorted({0, nm // 2, nm - 1}):
        parts.append(_text(left + (i + 0.5) * cell, top + h + 16, f"{m_values[i]:.2g}", 10))
    for j in sorted({0, nn // 2, nn - 1}):
        parts.append(_text(left - 6, top + h - (j + 0.5) * cell + 4, str(int(n_values[j])), 10, "end"))
    parts.append(_text(left + w / 2, top + h + 36, "m", 13))
    parts.append(_text(18, top + h / 2, "n", 13))
    # colour bar
    bx, bw = left + w + 25, 16.0
    steps = 64
    for s in range(steps):
        v = vmin + (vmax - vmin) * s / (steps - 1)
        y = top + h - (s + 1) * h / steps
        parts.append(
            f'<rect x="{_num(bx)}" y="{_num(y)}" width="{_num(bw)}" height="{_num(h / steps + 0.5)}" fill="{ramp_color(v, vmin, vmax)}"/>'
        )
    parts.append(_text(bx + bw + 4, top + h, f"{vmin:.3g}", 10, "start"))
    parts.append(_text(bx + bw + 4, top + 10, f"{vmax:.3g}", 10, "start"))
    parts.append(_text(bx + bw / 2, top - 8, "c", 12))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class PanelFrame:
    """Data-to-pixel mapping of one chart panel."""

    left: float
    top: float
    width: float
    height: float
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def x_px(self, x: float) -> float:
        return self.left + (x - self.xmin) / (self.xmax - self.xmin) * self.width

    def y_px(self, y: float) -> float:
        return self.top + self.height - (y - self.ymin) / (self.ymax - self.ymin) * self.height

    def x_data(self, px: float) -> float:
        return self.xmin + (px - self.left) / self.width * (self.xmax - self.xmin)

    def y_data(self, px: float) -> float:
        return self.ymin + (self.top + self.height - px) / self.height * (self.ymax - self.ymin)


def split_segments(points: Sequence[SeriesPoint], field: str) -> list[list[tuple[float, float]]]:
    """Runs of consecutive present points; absent points break the line."""
    segs, cur = [], []
    for p in sorted(points, key=lambda q: q.fraction):
        v = getattr(p, field)
        if v is None:
            if cur:
                segs.append(cur)
            cur = []
        else:
            cur.append((p.fraction, float(v)))
    if cur:
        segs.append(cur)
    return segs


def _panel_range(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.05, hi + 0.05
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def panel_frames(series: Mapping[str, Sequence[SeriesPoint]], fields=("m", "c1", "c2")) -> list[PanelFrame]:
    xs = [p.fraction for pts in series.values() for p in pts] or [0.0, 1.0]
    xmin, xmax = min(0.0, min(xs)), max(1.0, max(xs))
    frames = []
    pw, ph, left, top, gap = 300.0, 220.0, 60.0, 50.0, 70.0
    for k, f in enumerate(fields):
        vals = [getattr(p, f) for pts in series.values() for p in pts if getattr(p, f) is not None]
        ymin, ymax = _panel_range(vals)
        frames.append(PanelFrame(left + k * (pw + gap), top, pw, ph, xmin, xmax, ymin, ymax))
    return frames


FIELD_LABELS = {"m": "m(G)", "c1": "c1 (optimist)", "c2": "c2 (pessimist)", "kearns": "Kearns value"}


def series_svg(
    series: Mapping[str, Sequence[SeriesPoint]],
    fields=("m", "c1", "c2"),
    title: str = "",
) -> str:
    """Side-by-side panels, one per field; one polyline per group.

    ``series`` maps a legend label to its points. Fraction is on the x axis.
    Gaps are left where a point is absent, and an isolated point is drawn
    as a marker only.
    """
    frames = panel_frames(series, fields)
    W = frames[-1].left + frames[-1].width + 40
    legend_h = 18 * len(series)
    H = frames[0].top + frames[0].height + 60 + legend_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(W)}" height="{_num(H)}" viewBox="0 0 {_num(W)} {_num(H)}">',
        f'<rect x="0" y="0" width="{_num(W)}" height="{_num(H)}" fill="white"/>',
    ]
    if title:
        parts.append(_text(W / 2, 22, title, 14))
    for fr, field in zip(frames, fields):
        parts.append(
            f'<rect x="{_num(fr.left)}" y="{_num(fr.top)}" width="{_num(fr.width)}" height="{_num(fr.height)}" fill="none" stroke="black"/>'
        )
        parts.append(_text(fr.left + fr.width / 2, fr.top - 8, FIELD_LABELS.get(field, field), 12))
        for t in (fr.xmin, (fr.xmin + fr.xmax) / 2, fr.xmax):
            parts.append(_text(fr.x_px(t), fr.top + fr.height + 15, f"{t:.0%}", 10))
        for t in (fr.ymin, (fr.ymin + fr.ymax) / 2, fr.ymax):
            parts.append(_text(fr.left - 5, fr.y_px(t) + 4, f"{t:.3g}", 10, "end"))
        parts.append(_text(fr.left + fr.width / 2, fr.top + fr.height + 32, "fraction kept", 11))
        for s_i, (label, pts) in enumerate(series.items()):
            color = COLORS[s_i % len(COLORS)]
            for seg in split_segments(pts, field):
                coords = [(fr.x_px(x), fr.y_px(y)) for x, y in seg]
                if len(coords) == 1:
                    cx, cy = coords[0]
                    parts.append(f'<circle cx="{_num(cx)}" cy="{_num(cy)}" r="3" fill="{color}" data-field="{field}"/>')
                else:
                    pts_attr = " ".join(f"{_num(x)},{_num(y)}" for x, y in coords)
                    parts.append(
                        f'<polyline points="{pts_attr}" fill="none" stroke="{color}" stroke-width="1.5" data-field="{field}"/>'
                    )
    ly = frames[0].top + frames[0].height + 55
    for s_i, label in enumerate(series):
        color = COLORS[s_i % len(COLORS)]
        y = ly + 18 * s_i
        parts.append(f'<rect x="{_num(frames[0].left)}" y="{_num(y - 9)}" width="12" height="4" fill="{color}"/>')
        parts.append(_text(frames[0].left + 18, y - 3, label, 11, "start"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_series_svg(paths, fields=("m", "c1", "c2"), title: str = "") -> str:
    """Chart one or more series CSV files; each file becomes one line per panel."""
    from pathlib import Path

    from .report import read_series_csv

    series = {Path(p).stem: read_series_csv(p) for p in paths}
    if not series:
        raise ValueError("need at least one series file")
    return series_svg(series, fields, title)
