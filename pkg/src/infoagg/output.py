"""CSV, plain-text summary and SVG writers.

Floats are written with ``repr``: the shortest decimal that round-trips to
the same double, so files are byte-stable across runs and platforms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .params import Precision


def fmt(value) -> str:
    if isinstance(value, Precision):
        return str(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "inf"
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


@dataclass(frozen=True)
class Check:
    name: str
    analytic: object
    empirical: object
    tolerance: object
    passed: bool

    def line(self) -> str:
        token = "PASS" if self.passed else "FAIL"
        return (f"check {self.name}: analytic={fmt(self.analytic)} "
                f"empirical={fmt(self.empirical)} tolerance={fmt(self.tolerance)} {token}")


def write_summary(path: Path, experiment: str, settings: Dict[str, object],
                  checks: Sequence[Check], notes: Sequence[str] = ()) -> None:
    lines = [f"experiment: {experiment}"]
    lines += [f"setting {k} = {fmt(v) if not isinstance(v, str) else v}"
              for k, v in settings.items()]
    lines += [f"note: {n}" for n in notes]
    lines += [c.line() for c in checks]
    lines.append("result: " + ("PASS" if all(c.passed for c in checks) else "FAIL"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_svg(path: Path, series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
              xlabel: str, ylabel: str, title: str = "",
              width: int = 640, height: int = 400) -> None:
    """Self-contained line chart, one polyline per series. Non-finite points are skipped."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12">{xlabel}</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{yv:.4g}</text>')
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
                          if math.isfinite(x) and math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{coords}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 14 * i}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
