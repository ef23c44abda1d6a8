"""Deterministic writers for CSV, JSON and SVG results."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .colormap import color


def fmt(x) -> str:
    """Fixed 12-significant-digit text for a number."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".12g")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(fmt(v)) if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> Path:
    text = json.dumps(_clean(data), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_population_csv(path: Path, pop) -> Path:
    lines = ["t_us,mode,population,p1_readout"]
    for j, t in enumerate(pop.times):
        for i, m in enumerate(pop.modes):
            lines.append(f"{fmt(t)},{int(m)},{fmt(pop.p[i, j])},{fmt(pop.p1_readout[i, j])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_band_csv(path: Path, band) -> Path:
    lines = ["k,omega_MHz,intensity,is_ridge"]
    for i, k in enumerate(band.k_grid):
        ridge_j = int(band.ridge_index[i])
        for j, w in enumerate(band.omega_grid):
            lines.append(f"{fmt(k)},{fmt(w)},{fmt(band.intensity[i, j])},{int(j == ridge_j)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_heatmap_svg(path: Path, values: np.ndarray, x_label: str, y_label: str,
                      title: str, cell: float = 4.0) -> Path:
    """Heatmap of ``values[row, col]`` (rows drawn bottom to top), max-normalized."""
    v = np.asarray(values, dtype=float)
    top = v.max() if v.size and v.max() > 0 else 1.0
    n_rows, n_cols = v.shape
    cw = max(1.0, min(cell, 800.0 / n_cols))
    ch = max(1.0, min(cell * 2, 400.0 / n_rows))
    width = n_cols * cw
    height = n_rows * ch
    margin = 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(width + 2 * margin)}" '
        f'height="{fmt(height + 2 * margin)}">',
        f'<text x="{margin}" y="{margin - 15}" font-size="12">{title}</text>',
        f'<g transform="translate({margin},{margin})" shape-rendering="crispEdges">',
    ]
    for r in range(n_rows):
        y = height - (r + 1) * ch
        for c in range(n_cols):
            parts.append(f'<rect x="{fmt(c * cw)}" y="{fmt(y)}" width="{fmt(cw)}" '
                         f'height="{fmt(ch)}" fill="{color(v[r, c] / top)}"/>')
    parts.append("</g>")
    parts.append(f'<text x="{fmt(margin + width / 2)}" y="{fmt(height + margin + 25)}" '
                 f'font-size="11" text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="12" y="{fmt(margin + height / 2)}" font-size="11" '
                 f'transform="rotate(-90 12 {fmt(margin + height / 2)})" '
                 f'text-anchor="middle">{y_label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def write_chevron_csv(path: Path, times, modes, p1, p_mode) -> Path:
    """Vacuum-Rabi data: one independent experiment per parked mode."""
    lines = ["t_us,mode,p1,mode_population"]
    for j, t in enumerate(times):
        for i, m in enumerate(modes):
            lines.append(f"{fmt(t)},{int(m)},{fmt(p1[i, j])},{fmt(p_mode[i, j])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
