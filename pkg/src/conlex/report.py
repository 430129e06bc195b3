"""Serialization of explanations and stability reports, plus SVG charts.

Every writer here is deterministic: field order is fixed, floats are
printed at 17 significant digits, and dict-valued diagnostics render in
sorted key order, so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from .blackbox.external import format_float
from .evaluation import StabilityReport
from .explainers import Explanation


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, dict):
        return ",".join(f"{k}={_fmt_value(v[k])}" for k in sorted(v))
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


def feature_name(names, j: int) -> str:
    return names[j] if names is not None else f"f{j}"


def write_explanation(e: Explanation, feature_names=None) -> str:
    """Fixed-order structured text document for one explanation."""
    lines = [
        f"method: {e.method}",
        f"seed: {e.config.get('seed', 0)}",
        f"target_class: {e.target_class}",
        "phi: " + " ".join(format_float(v) for v in e.phi),
        f"intercept: {format_float(e.intercept)}",
        "top_features:",
    ]
    for j, score in e.top_features:
        lines.append(f"  {j}\t{feature_name(feature_names, j)}\t{format_float(score)}")
    lines.append("diagnostics:")
    for key in sorted(e.diagnostics):
        lines.append(f"  {key}: {_fmt_value(e.diagnostics[key])}")
    return "\n".join(lines) + "\n"


def parse_explanation(text: str) -> dict:
    """Inverse of write_explanation for the fields tests care about."""
    out: dict = {"top_features": [], "diagnostics": {}}
    section = None
    for line in text.splitlines():
        if line.startswith("  ") and section == "top_features":
            idx, name, score = line.strip().split("\t")
            out["top_features"].append((int(idx), name, float(score)))
        elif line.startswith("  ") and section == "diagnostics":
            key, _, val = line.strip().partition(": ")
            out["diagnostics"][key] = val
        elif line.startswith("top_features:"):
            section = "top_features"
        elif line.startswith("diagnostics:"):
            section = "diagnostics"
        else:
            section = None
            key, _, val = line.partition(": ")
            if key == "phi":
                out["phi"] = np.array([float(v) for v in val.split()] if val else [])
            elif key in ("seed", "target_class"):
                out[key] = int(val)
            elif key == "intercept":
                out[key] = float(val)
            elif key:
                out[key] = val
    return out


def _cell_rows(report: StabilityReport):
    for cell in report.cells:
        for idx in cell.index_ids:
            yield cell, idx


def stability_csv(reports: list[StabilityReport]) -> str:
    """Per-index rows, then a summary block with one row per grid cell."""
    lines = ["dataset,method,n_prime,index_id,mean_jaccard"]
    for report in reports:
        for cell, idx in _cell_rows(report):
            m = cell.mean_jaccard[idx]
            val = "nan" if math.isnan(m) else format_float(m)
            lines.append(f"{cell.dataset},{cell.method},{cell.n_prime},{idx},{val}")
    lines.append("# summary")
    lines.append("dataset,method,n_prime,grand_mean_jaccard,complete")
    for report in reports:
        for cell in report.cells:
            g = "nan" if math.isnan(cell.grand_mean) else format_float(cell.grand_mean)
            complete = "true" if cell.complete else "false"
            lines.append(f"{cell.dataset},{cell.method},{cell.n_prime},{g},{complete}")
    return "\n".join(lines) + "\n"


def stability_document(report: StabilityReport) -> str:
    """Structured text mirror of the report, for the plot emitter."""
    lines = [
        f"dataset: {report.dataset}",
        f"master_seed: {report.master_seed}",
        f"repeats: {report.repeats}",
        f"k: {report.k}",
        "index_ids: " + ",".join(str(i) for i in report.index_ids),
        "n_prime_grid: " + ",".join(str(n) for n in report.n_prime_grid),
        "methods: " + ",".join(report.methods),
        "cells:",
    ]
    for cell in report.cells:
        g = "nan" if math.isnan(cell.grand_mean) else format_float(cell.grand_mean)
        lines.append(
            f"  {cell.method}\t{cell.n_prime}\t{g}\t{len(cell.failures)}"
        )
    return "\n".join(lines) + "\n"


# fixed palette, one series per method
_SERIES_COLORS = ("#2b7bba", "#d64541", "#1e8449", "#8e44ad", "#d68910", "#16a085")
_POS_FILL = "#2b7bba"
_NEG_FILL = "#d64541"


def _svg_header(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def svg_bar_chart(e: Explanation, feature_names=None) -> str:
    """Horizontal bars of the top-k scores; sign picks the fill color."""
    rows = e.top_features
    width, row_h, label_w = 640, 28, 180
    height = 60 + row_h * len(rows)
    half = (width - label_w - 40) / 2.0
    x_zero = label_w + half
    scale_max = max((abs(s) for _, s in rows), default=1.0) or 1.0
    parts = [_svg_header(width, height)]
    parts.append(
        f'<text x="{label_w}" y="24" font-size="14" font-family="sans-serif">'
        f"top features, method {e.method}, class {e.target_class}</text>\n"
    )
    parts.append(
        f'<line x1="{x_zero:.1f}" y1="40" x2="{x_zero:.1f}" y2="{height - 16}" '
        f'stroke="#888" stroke-width="1"/>\n'
    )
    for i, (j, score) in enumerate(rows):
        y = 48 + i * row_h
        bar = abs(score) / scale_max * (half - 8)
        x = x_zero if score >= 0 else x_zero - bar
        fill = _POS_FILL if score >= 0 else _NEG_FILL
        name = feature_name(feature_names, j)
        parts.append(
            f'<text x="{label_w - 8}" y="{y + 14}" font-size="12" '
            f'font-family="sans-serif" text-anchor="end">{name}</text>\n'
        )
        parts.append(
            f'<rect x="{x:.2f}" y="{y}" width="{bar:.2f}" height="{row_h - 8}" '
            f'fill="{fill}"/>\n'
        )
        parts.append(
            f'<text x="{x_zero + (8 + bar) * (1 if score >= 0 else -1):.2f}" '
            f'y="{y + 14}" font-size="11" font-family="sans-serif" '
            f'text-anchor="{"start" if score >= 0 else "end"}">{score:.4g}</text>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)


def svg_line_chart(report: StabilityReport) -> str:
    """Grand mean Jaccard vs n', one polyline per method."""
    width, height = 640, 420
    ml, mr, mt, mb = 70, 180, 40, 50
    plot_w, plot_h = width - ml - mr, height - mt - mb
    grid = report.n_prime_grid
    xmin, xmax = min(grid), max(grid)
    span = (xmax - xmin) or 1

    def sx(n):
        return ml + (n - xmin) / span * plot_w

    def sy(v):
        return mt + (1.0 - v) * plot_h

    parts = [_svg_header(width, height)]
    parts.append(
        f'<text x="{ml}" y="24" font-size="14" font-family="sans-serif">'
        f"mean top-{report.k} Jaccard vs surrogate count, {report.dataset}</text>\n"
    )
    parts.append(
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="#333"/>\n'
        f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" y2="{mt + plot_h}" '
        f'stroke="#333"/>\n'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(
            f'<text x="{ml - 8}" y="{y + 4:.1f}" font-size="11" text-anchor="end" '
            f'font-family="sans-serif">{frac:.2f}</text>\n'
        )
    for n in grid:
        parts.append(
            f'<text x="{sx(n):.1f}" y="{mt + plot_h + 18}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{n}</text>\n'
        )
    for mi, method in enumerate(report.methods):
        color = _SERIES_COLORS[mi % len(_SERIES_COLORS)]
        pts = []
        for n in grid:
            g = report.grand_mean(method, n)
            if not math.isnan(g):
                pts.append(f"{sx(n):.2f},{sy(g):.2f}")
        if pts:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" '
                f'stroke-width="2"/>\n'
            )
        ly = mt + 16 + mi * 20
        parts.append(
            f'<rect x="{ml + plot_w + 16}" y="{ly - 10}" width="12" height="12" '
            f'fill="{color}"/>\n'
            f'<text x="{ml + plot_w + 34}" y="{ly}" font-size="12" '
            f'font-family="sans-serif">{method}</text>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)
