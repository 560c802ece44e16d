"""CSV result files and minimal SVG figures."""
from __future__ import annotations

import csv
import html
import math
import os
from dataclasses import asdict

import numpy as np

from ..model import SystemParams

SCHEMA_NAME = "d2dcovert-results"
SCHEMA_VERSION = 1

BUNDLE_COLUMNS = ["p_success", "p_fa", "p_md", "p_secrecy_outage", "p_secure", "detection_error", "utility"]
COLUMNS = (
    ["command", "quantity", "level_name", "level", "sweep_name", "sweep_value"]
    + SystemParams.field_names()
    + ["p_d", "p_j", "tau", "tau_star"]
    + BUNDLE_COLUMNS
    + ["feasible", "analytic", "mc_mean", "mc_std_error", "mc_trials", "verdict",
       "iteration", "u0", "u1", "step_error", "status", "wall_time"]
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def make_row(command: str, params: SystemParams, **values) -> dict:
    """One result row: every model parameter plus whatever the command measured."""
    row = dict.fromkeys(COLUMNS)
    row["command"] = command
    row.update(asdict(params))
    bundle = values.pop("bundle", None)
    if bundle is not None:
        row.update(asdict(bundle))
    strategy = values.pop("strategy", None)
    if strategy is not None:
        row["p_d"], row["p_j"] = strategy.p_d, strategy.p_j
    unknown = set(values) - set(COLUMNS)
    if unknown:
        raise KeyError(f"unknown result columns {sorted(unknown)}")
    row.update(values)
    return row


def write_rows(path, rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schema", SCHEMA_NAME, SCHEMA_VERSION])
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in COLUMNS])


def read_rows(path) -> list:
    """Rows of a result file as dicts of strings; checks the schema row."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        schema = next(r)
        if schema[:2] != ["schema", SCHEMA_NAME] or int(schema[2]) != SCHEMA_VERSION:
            raise ValueError(f"{path}: unexpected schema row {schema}")
        header = next(r)
        return [dict(zip(header, line)) for line in r]


# ---------------------------------------------------------------------------
# SVG

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H, _M = 640, 420, 60


def _ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _text(x, y, s, anchor="middle", size=12, extra=""):
    return f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}" {extra}>{html.escape(s)}</text>'


def line_chart(path, series: dict, xlabel: str, ylabel: str, title: str = "") -> None:
    """``series`` maps a legend label to ``(x, y)`` arrays; non-finite points are dropped."""
    pts = [(np.asarray(x, float), np.asarray(y, float)) for x, y in series.values()]
    xs = np.concatenate([x[np.isfinite(y)] for x, y in pts]) if pts else np.array([0.0, 1.0])
    ys = np.concatenate([y[np.isfinite(y)] for _, y in pts]) if pts else np.array([0.0, 1.0])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    sx = lambda v: _M + (v - x0) / (x1 - x0) * (_W - 2 * _M)
    sy = lambda v: _H - _M - (v - y0) / (y1 - y0) * (_H - 2 * _M)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_M}" y="{_M}" width="{_W - 2 * _M}" height="{_H - 2 * _M}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(_text(sx(t), _H - _M + 16, f"{t:.3g}"))
    for t in _ticks(y0, y1):
        out.append(_text(_M - 6, sy(t) + 4, f"{t:.3g}", anchor="end"))
    out.append(_text(_W / 2, _H - 15, xlabel))
    out.append(_text(18, _H / 2, ylabel, extra=f'transform="rotate(-90 18 {_H / 2})"'))
    if title:
        out.append(_text(_W / 2, 30, title, size=14))
    for k, (label, (x, y)) in enumerate(series.items()):
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(y)
        colour = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x[ok], y[ok]))
        if coords:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<line x1="{_W - _M - 150}" y1="{_M + 15 + 16 * k}" x2="{_W - _M - 130}" '
                   f'y2="{_M + 15 + 16 * k}" stroke="{colour}" stroke-width="2"/>')
        out.append(_text(_W - _M - 125, _M + 19 + 16 * k, str(label), anchor="start", size=11))
    out.append("</svg>")
    _write(path, out)


def heatmap(path, x, y, z, xlabel: str, ylabel: str, title: str = "", mask=None, marker=None) -> None:
    """``z[i, j]`` at ``(x[i], y[j])``; cells with ``mask`` False are hatched grey, ``marker`` is an (x, y) point."""
    z = np.asarray(z, float)
    nx, ny = z.shape
    fin = z[np.isfinite(z)]
    lo, hi = (float(fin.min()), float(fin.max())) if fin.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    cw, ch = (_W - 2 * _M) / nx, (_H - 2 * _M) / ny
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for i in range(nx):
        for j in range(ny):
            v = z[i, j]
            if mask is not None and not mask[i, j]:
                fill = "#bbbbbb"
            elif not math.isfinite(v):
                fill = "#ffffff"
            else:
                t = (v - lo) / span
                fill = f"rgb({int(255 * t)},{int(80 + 100 * (1 - abs(2 * t - 1)))},{int(255 * (1 - t))})"
            out.append(f'<rect x="{_M + i * cw:.2f}" y="{_H - _M - (j + 1) * ch:.2f}" '
                       f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" fill="{fill}"/>')
    out.append(f'<rect x="{_M}" y="{_M}" width="{_W - 2 * _M}" height="{_H - 2 * _M}" fill="none" stroke="black"/>')
    x, y = np.asarray(x, float), np.asarray(y, float)
    for k in sorted({0, nx // 2, nx - 1}):
        out.append(_text(_M + (k + 0.5) * cw, _H - _M + 16, f"{x[k]:.3g}"))
    for k in sorted({0, ny // 2, ny - 1}):
        out.append(_text(_M - 6, _H - _M - (k + 0.5) * ch + 4, f"{y[k]:.3g}", anchor="end"))
    if marker is not None:
        i = int(np.argmin(np.abs(x - marker[0])))
        j = int(np.argmin(np.abs(y - marker[1])))
        out.append(f'<circle cx="{_M + (i + 0.5) * cw:.1f}" cy="{_H - _M - (j + 0.5) * ch:.1f}" r="5" '
                   f'fill="none" stroke="black" stroke-width="2"/>')
    out.append(_text(_W / 2, _H - 15, xlabel))
    out.append(_text(18, _H / 2, ylabel, extra=f'transform="rotate(-90 18 {_H / 2})"'))
    out.append(_text(_W / 2, 30, f"{title}  [{lo:.3g}, {hi:.3g}]", size=14))
    out.append("</svg>")
    _write(path, out)


def _write(path, lines):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
