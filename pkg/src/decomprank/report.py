"""CSV and SVG output for benchmark results.

SVG is written by hand with fixed number formatting so that identical
input always produces identical bytes.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .stats import ComparisonTable, PcaResult

WIDTH, HEIGHT, PAD = 480, 320, 40


def box_stats(values) -> dict:
    """Quartiles (linear interpolation) and Tukey whiskers of ``values``."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("box statistics of an empty sample")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "low": float(inside.min()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "high": float(inside.max()),
        "outliers": [float(x) for x in v if x < inside.min() or x > inside.max()],
    }


def _f(x: float) -> str:
    return f"{x:.3f}"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    out = [head, '<rect width="100%" height="100%" fill="white"/>']
    out.append(f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    out.extend(body)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda x: a + (x - lo) / span * (b - a)


def scatter_svg(x, y, title: str, xlabel: str = "", ylabel: str = "", labels=None, diagonal: bool = False) -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo_x, hi_x = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    lo_y, hi_y = (float(y.min()), float(y.max())) if y.size else (0.0, 1.0)
    if diagonal:
        lo_x = lo_y = min(lo_x, lo_y)
        hi_x = hi_y = max(hi_x, hi_y)
    sx = _scale(lo_x, hi_x, PAD, WIDTH - PAD)
    sy = _scale(lo_y, hi_y, HEIGHT - PAD, PAD)
    body = [
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 8}" text-anchor="middle" font-size="11">{_esc(xlabel)}</text>',
        f'<text x="12" y="{HEIGHT / 2:.0f}" font-size="11" transform="rotate(-90 12 {HEIGHT / 2:.0f})" '
        f'text-anchor="middle">{_esc(ylabel)}</text>',
    ]
    if diagonal:
        body.append(
            f'<line x1="{_f(sx(lo_x))}" y1="{_f(sy(lo_y))}" x2="{_f(sx(hi_x))}" y2="{_f(sy(hi_y))}" '
            'stroke="grey" stroke-dasharray="4 3"/>'
        )
    for i, (a, b) in enumerate(zip(x, y)):
        body.append(f'<circle cx="{_f(sx(a))}" cy="{_f(sy(b))}" r="3" fill="steelblue"/>')
        if labels is not None:
            body.append(f'<text x="{_f(sx(a) + 4)}" y="{_f(sy(b) - 4)}" font-size="9">{_esc(labels[i])}</text>')
    return _svg(body, title)


def boxplot_svg(groups: dict, title: str) -> str:
    names = list(groups)
    if not names:
        raise ValueError("box plot needs at least one group")
    stats = [box_stats(groups[n]) for n in names]
    lo = min(min(s["low"], *s["outliers"]) if s["outliers"] else s["low"] for s in stats)
    hi = max(max(s["high"], *s["outliers"]) if s["outliers"] else s["high"] for s in stats)
    sy = _scale(lo, hi, HEIGHT - PAD, PAD)
    step = (WIDTH - 2 * PAD) / len(names)
    body = [f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>']
    for i, (name, s) in enumerate(zip(names, stats)):
        cx = PAD + step * (i + 0.5)
        half = min(step * 0.3, 30)
        body.append(f'<line x1="{_f(cx)}" y1="{_f(sy(s["low"]))}" x2="{_f(cx)}" y2="{_f(sy(s["q1"]))}" stroke="black"/>')
        body.append(f'<line x1="{_f(cx)}" y1="{_f(sy(s["q3"]))}" x2="{_f(cx)}" y2="{_f(sy(s["high"]))}" stroke="black"/>')
        top, bottom = sy(s["q3"]), sy(s["q1"])
        body.append(
            f'<rect x="{_f(cx - half)}" y="{_f(top)}" width="{_f(2 * half)}" height="{_f(bottom - top)}" '
            'fill="lightsteelblue" stroke="black"/>'
        )
        body.append(
            f'<line x1="{_f(cx - half)}" y1="{_f(sy(s["median"]))}" x2="{_f(cx + half)}" '
            f'y2="{_f(sy(s["median"]))}" stroke="black" stroke-width="2"/>'
        )
        for o in s["outliers"]:
            body.append(f'<circle cx="{_f(cx)}" cy="{_f(sy(o))}" r="2" fill="none" stroke="black"/>')
        body.append(f'<text x="{_f(cx)}" y="{HEIGHT - PAD + 14}" text-anchor="middle" font-size="10">{_esc(name)}</text>')
    return _svg(body, title)


def emit_report(out_dir, tables: dict, pca_result: PcaResult | None = None, boxplots: dict | None = None,
                scatter: dict | None = None, pca_labels=None) -> list[Path]:
    """Write every table as CSV plus the PCA, scatter and box-plot SVGs.

    ``tables`` maps a file stem to a :class:`ComparisonTable`. All content
    is rendered before anything is written, so a bad input leaves no
    partial files behind.
    """
    if not tables:
        raise ValueError("nothing to report")
    for name, table in tables.items():
        if not table.methods:
            raise ValueError(f"table {name!r} has no methods")
    files: dict[str, str] = {}
    for name, table in tables.items():
        lines = [",".join(["instance", *table.methods])]
        for inst, row in zip(table.instances, table.scores):
            lines.append(",".join([str(inst), *(repr(float(v)) for v in row)]))
        files[f"{name}.csv"] = "\n".join(lines) + "\n"
    if pca_result is not None and pca_result.projected.shape[1] >= 2:
        P = pca_result.projected
        r = pca_result.explained_variance_ratio
        files["pca.svg"] = scatter_svg(
            P[:, 0], P[:, 1], "Instance features, first two components",
            f"PC1 ({100 * r[0]:.1f}%)", f"PC2 ({100 * r[1]:.1f}%)", labels=pca_labels,
        )
    for name, groups in (boxplots or {}).items():
        files[f"{name}.svg"] = boxplot_svg(groups, name.replace("_", " "))
    for name, (pred, actual) in (scatter or {}).items():
        files[f"{name}.svg"] = scatter_svg(pred, actual, name.replace("_", " "), "predicted", "actual", diagonal=True)
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []
    for fname in sorted(files):
        path = out / fname
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(files[fname])
        written.append(path)
    return written


__all__ = ["ComparisonTable", "box_stats", "boxplot_svg", "emit_report", "scatter_svg"]
