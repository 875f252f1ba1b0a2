"""Training-curve rendering as plain-text SVG (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .metrics import COLUMNS, read_metrics


class PlotError(ValueError):
    pass


_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]

_W, _H = 800, 500
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _series_from_file(path, key: str) -> Tuple[np.ndarray, np.ndarray]:
    rows = read_metrics(path)
    xs, ys = [], []
    for row in rows:
        value = getattr(row, key)
        if value is None:
            continue
        xs.append(row.env_steps)
        ys.append(float(value))
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)


def plot_curves(
    metrics_files: Sequence,
    keys: Sequence[str],
    out_path,
    mean_overlay: bool = False,
) -> None:
    """One polyline per (file, key); optional per-key mean overlay."""
    plottable = [c for c in COLUMNS if c not in ("mean_novelty",)]
    for key in keys:
        if key not in plottable:
            raise PlotError(f"unknown key {key!r}; available columns: {', '.join(plottable)}")
    series: List[Tuple[str, np.ndarray, np.ndarray]] = []
    for path in metrics_files:
        label_base = Path(path).stem if Path(path).parent == Path(".") else Path(path).parent.name
        for key in keys:
            xs, ys = _series_from_file(path, key)
            if len(xs):
                series.append((f"{label_base}:{key}", xs, ys))
    if not series:
        raise PlotError("empty metrics: no plottable points in any input file")
    if mean_overlay:
        for key in keys:
            member = [(xs, ys) for (label, xs, ys) in series if label.endswith(f":{key}")]
            if len(member) > 1:
                grid = member[0][0]
                stackd = np.stack([np.interp(grid, xs, ys) for xs, ys in member])
                series.append((f"mean:{key}", grid, stackd.mean(axis=0)))

    all_x = np.concatenate([xs for _, xs, _ in series])
    all_y = np.concatenate([ys for _, _, ys in series])
    x_lo, x_hi = float(all_x.min()), float(all_x.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 12}" text-anchor="middle" '
        f'font-size="13">env_steps</text>',
        f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">{", ".join(keys)}</text>',
        f'<text x="{_ML}" y="{_H - _MB + 16}" font-size="11" text-anchor="middle">{x_lo:g}</text>',
        f'<text x="{_W - _MR}" y="{_H - _MB + 16}" font-size="11" text-anchor="middle">{x_hi:g}</text>',
        f'<text x="{_ML - 6}" y="{_H - _MB}" font-size="11" text-anchor="end">{y_lo:g}</text>',
        f'<text x="{_ML - 6}" y="{_MT + 10}" font-size="11" text-anchor="end">{y_hi:g}</text>',
    ]
    for k, (label, xs, ys) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        ly = _MT + 14 + 14 * k
        parts.append(f'<line x1="{_W - _MR - 150}" y1="{ly - 4}" x2="{_W - _MR - 130}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 125}" y="{ly}" font-size="11">{label}</text>')
    parts.append("</svg>")

    out_path = Path(out_path)
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    tmp.write_text("\n".join(parts))
    tmp.replace(out_path)
