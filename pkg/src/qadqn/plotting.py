"""Static SVG chart of closing prices with trade markers."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .actions import Action
from .backtest import TradeLog
from .data import DataError, PriceSeries

BUY_COLOR = "#1a9850"
SELL_COLOR = "#d73027"


def _triangle(x: float, y: float, up: bool, size: float = 6.0) -> str:
    if up:
        pts = [(x, y - size), (x - size, y + size), (x + size, y + size)]
    else:
        pts = [(x, y + size), (x - size, y - size), (x + size, y - size)]
    return " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)


def render_svg(series: PriceSeries, trades: TradeLog, width: int = 900, height: int = 400,
               margin: int = 40, title: str | None = None) -> str:
    """Close-price polyline, green up-triangles at buys, red down-triangles at sells."""
    n = len(series)
    closes = series.closes
    for rec in trades:
        if not 0 <= rec.bar < n:
            raise DataError(f"trade at bar {rec.bar} is outside the {n}-bar series")
        if rec.date and rec.date != series.dates[rec.bar].isoformat():
            raise DataError(f"trade at bar {rec.bar} dated {rec.date}, series has {series.dates[rec.bar]}")
    lo, hi = float(closes.min()), float(closes.max())
    span = hi - lo if hi > lo else 1.0
    xs = margin + (width - 2 * margin) * np.arange(n) / max(n - 1, 1)
    ys = height - margin - (height - 2 * margin) * (closes - lo) / span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{margin}" y="{margin / 2:.0f}" font-family="sans-serif" '
                     f'font-size="14">{escape(title)}</text>')
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline class="price" fill="none" stroke="#333333" stroke-width="1.2" points="{points}"/>')
    for rec in trades:
        if rec.action == Action.SIT:
            continue
        buy = rec.action == Action.BUY
        parts.append(f'<polygon class="{"buy" if buy else "sell"}" fill="{BUY_COLOR if buy else SELL_COLOR}" '
                     f'points="{_triangle(xs[rec.bar], ys[rec.bar], buy)}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_trades(series: PriceSeries, trades: TradeLog, path: str | Path, **kw) -> None:
    Path(path).write_text(render_svg(series, trades, **kw), encoding="utf-8")
