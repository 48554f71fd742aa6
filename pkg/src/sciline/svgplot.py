"""Minimal deterministic SVG charts (lines with bands, histograms).

Hand-rolled rather than a plotting library so output bytes depend only
on the data: no timestamps, font probing, or environment-sensitive ids.
"""

from __future__ import annotations

from pathlib import Path

WIDTH = 640
HEIGHT = 400
MARGIN = 56

PALETTE = ("#2a9d8f", "#e76f51", "#264653", "#e9c46a", "#8ab17d", "#6d597a")


def _fmt(x: float) -> str:
    return format(float(x), ".4f").rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, title: str, comment: str | None = None):
        self.parts: list[str] = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        ]
        if comment:
            self.parts.append(f"<!-- {comment} -->")
        self.parts.append(
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>'
        )
        self.parts.append(
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )

    def write(self, path: str | Path) -> None:
        self.parts.append("</svg>")
        Path(path).write_text("\n".join(self.parts) + "\n", encoding="utf-8")


def _scale(lo: float, hi: float, pixel_lo: float, pixel_hi: float):
    span = hi - lo if hi > lo else 1.0

    def to_pixel(v: float) -> float:
        return pixel_lo + (v - lo) / span * (pixel_hi - pixel_lo)

    return to_pixel


def _axes(canvas: _Canvas, x_lo, x_hi, y_lo, y_hi, x_label, y_label) -> None:
    canvas.parts.append(
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>'
    )
    canvas.parts.append(
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        xp = MARGIN + frac * (WIDTH - 2 * MARGIN)
        yp = HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)
        canvas.parts.append(
            f'<text x="{_fmt(xp)}" y="{HEIGHT - MARGIN + 18}" '
            f'text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{_fmt(xv)}</text>'
        )
        canvas.parts.append(
            f'<text x="{MARGIN - 8}" y="{_fmt(yp + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(yv)}</text>'
        )
    canvas.parts.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    canvas.parts.append(
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{y_label}</text>'
    )


def line_chart(
    path: str | Path,
    title: str,
    series: dict[str, list[tuple[float, float]]],
    bands: dict[str, list[tuple[float, float, float]]] | None = None,
    x_label: str = "",
    y_label: str = "",
    comment: str | None = None,
) -> None:
    """Multi-series line chart; optional (x, low, high) confidence bands."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if bands:
        for pts in bands.values():
            ys.extend(v for _, lo, hi in pts for v in (lo, hi))
    if not xs:
        raise ValueError("line_chart needs at least one point")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    to_x = _scale(x_lo, x_hi, MARGIN, WIDTH - MARGIN)
    to_y = _scale(y_lo, y_hi, HEIGHT - MARGIN, MARGIN)
    canvas = _Canvas(title, comment)
    _axes(canvas, x_lo, x_hi, y_lo, y_hi, x_label, y_label)
    names = sorted(series)
    if bands:
        for i, name in enumerate(names):
            band = bands.get(name)
            if not band:
                continue
            color = PALETTE[i % len(PALETTE)]
            forward = [f"{_fmt(to_x(x))},{_fmt(to_y(lo))}" for x, lo, _ in band]
            backward = [
                f"{_fmt(to_x(x))},{_fmt(to_y(hi))}" for x, _, hi in reversed(band)
            ]
            canvas.parts.append(
                f'<polygon points="{" ".join(forward + backward)}" '
                f'fill="{color}" fill-opacity="0.15" stroke="none"/>'
            )
    for i, name in enumerate(names):
        pts = series[name]
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(to_x(x))},{_fmt(to_y(y))}" for x, y in pts)
        canvas.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        canvas.parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{_fmt(MARGIN + 14 * i + 10)}" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{name}</text>'
        )
    canvas.write(path)


def histogram(
    path: str | Path,
    title: str,
    bin_edges: list[float],
    counts_by_series: dict[str, list[int]],
    x_label: str = "",
    y_label: str = "count",
    comment: str | None = None,
) -> None:
    """Overlaid step histograms on shared bin edges."""
    if not counts_by_series:
        raise ValueError("histogram needs at least one series")
    max_count = max(max(c) if c else 0 for c in counts_by_series.values())
    x_lo, x_hi = bin_edges[0], bin_edges[-1]
    to_x = _scale(x_lo, x_hi, MARGIN, WIDTH - MARGIN)
    to_y = _scale(0, max_count or 1, HEIGHT - MARGIN, MARGIN)
    canvas = _Canvas(title, comment)
    _axes(canvas, x_lo, x_hi, 0, max_count or 1, x_label, y_label)
    for i, name in enumerate(sorted(counts_by_series)):
        counts = counts_by_series[name]
        color = PALETTE[i % len(PALETTE)]
        coords = [f"{_fmt(to_x(bin_edges[0]))},{_fmt(to_y(0))}"]
        for b, count in enumerate(counts):
            coords.append(f"{_fmt(to_x(bin_edges[b]))},{_fmt(to_y(count))}")
            coords.append(f"{_fmt(to_x(bin_edges[b + 1]))},{_fmt(to_y(count))}")
        coords.append(f"{_fmt(to_x(bin_edges[-1]))},{_fmt(to_y(0))}")
        canvas.parts.append(
            f'<polyline points="{" ".join(coords)}" fill="none" '
            f'stroke="{color}" stroke-width="1.2"/>'
        )
        canvas.parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{_fmt(MARGIN + 14 * i + 10)}" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{name}</text>'
        )
    canvas.write(path)
