"""CSV tables and small self-contained SVG line charts.

No plotting dependency: charts are hand-assembled polylines, good enough for
eyeballing training curves and benchmark trends in a browser. Output is
deterministic for identical inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["svg_line_chart", "write_csv"]

_WIDTH = 640
_HEIGHT = 360
_MARGIN = 52


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write one CSV file, creating parent directories as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
    return path


def _scaled(values: list[float], lo: float, hi: float, out_lo: float, out_hi: float) -> list[float]:
    if hi <= lo:
        # flat series: park everything mid-range
        return [(out_lo + out_hi) / 2.0 for _ in values]
    return [out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo) for v in values]


def svg_line_chart(
    path: str | Path,
    xs: Sequence[float],
    ys: Sequence[float],
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> Path:
    """Render one series as an SVG polyline.

    A single point degrades to a circle marker rather than erroring; empty
    input raises ValueError.
    """
    if len(xs) != len(ys):
        raise ValueError(f"series length mismatch: {len(xs)} xs vs {len(ys)} ys")
    if not xs:
        raise ValueError("cannot chart an empty series")
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    px = _scaled(xs, x_lo, x_hi, _MARGIN, _WIDTH - _MARGIN)
    # SVG y grows downward
    py = _scaled(ys, y_lo, y_hi, _HEIGHT - _MARGIN, _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{_HEIGHT - _MARGIN}" x2="{_WIDTH - _MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black" stroke-width="1"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{x_label}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="14" y="{_HEIGHT // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" '
            f'transform="rotate(-90 14 {_HEIGHT // 2})">{y_label}</text>'
        )
    # axis extent labels
    parts.append(
        f'<text x="{_MARGIN}" y="{_HEIGHT - _MARGIN + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{x_lo:g}</text>'
    )
    parts.append(
        f'<text x="{_WIDTH - _MARGIN}" y="{_HEIGHT - _MARGIN + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{x_hi:g}</text>'
    )
    parts.append(
        f'<text x="{_MARGIN - 6}" y="{_HEIGHT - _MARGIN + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_lo:.4g}</text>'
    )
    parts.append(
        f'<text x="{_MARGIN - 6}" y="{_MARGIN + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_hi:.4g}</text>'
    )

    if len(xs) == 1:
        parts.append(f'<circle cx="{px[0]:.2f}" cy="{py[0]:.2f}" r="4" fill="#1f6fb2"/>')
    else:
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>'
        )
    parts.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
