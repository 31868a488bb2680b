"""Deterministic CSV and SVG output plus log-log slope fitting."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["fit_loglog_slope", "write_text", "csv_table", "svg_loglog_plot"]


def fit_loglog_slope(x, y):
    """Least-squares slope and intercept of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def csv_table(header_comment: str, columns: dict[str, list]) -> str:
    """Byte-stable CSV: comment line, column header, repr-formatted rows."""
    names = list(columns)
    rows = zip(*[columns[c] for c in names])
    lines = [f"# {header_comment}", ",".join(names)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


_W, _H, _PAD = 480, 360, 48


def _scaled(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [(out_lo + (v - lo) / span * (out_hi - out_lo)) for v in vals]


def svg_loglog_plot(
    x, y, fit_slope: float, fit_intercept: float, theory_slope: float, title: str
) -> str:
    """Minimal log-log plot: one point series, a fitted line and a theory line.

    The theory line is anchored at the first data point so only its slope is
    meaningful.
    """
    lx = [math.log(v) for v in x]
    ly = [math.log(v) for v in y]
    fit_y = [fit_intercept + fit_slope * v for v in lx]
    th_anchor = ly[0] - theory_slope * lx[0]
    th_y = [th_anchor + theory_slope * v for v in lx]
    lo_x, hi_x = min(lx), max(lx)
    all_y = ly + fit_y + th_y
    lo_y, hi_y = min(all_y), max(all_y)
    px = _scaled(lx, lo_x, hi_x, _PAD, _W - _PAD)
    def py(vals):
        return _scaled(vals, lo_y, hi_y, _H - _PAD, _PAD)

    def path(ys_scaled):
        return " ".join(f"{'M' if i == 0 else 'L'} {px[i]:.2f} {v:.2f}" for i, v in enumerate(ys_scaled))

    circles = "\n".join(
        f'    <circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="black"/>'
        for cx, cy in zip(px, py(ly))
    )
    return f"""<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">
  <text x="{_W // 2}" y="20" text-anchor="middle" font-size="13">{title}</text>
  <path d="{path(py(fit_y))}" stroke="steelblue" fill="none" stroke-width="1.5" class="fit"/>
  <path d="{path(py(th_y))}" stroke="firebrick" fill="none" stroke-width="1.5" stroke-dasharray="5,4" class="theory"/>
  <g class="points">
{circles}
  </g>
</svg>
"""
