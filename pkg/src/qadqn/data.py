"""OHLC price series: CSV ingestion, log-return state windows, synthetic fixtures.

CSV layout is ``date,open,high,low,close,volume`` with ISO-8601 dates, one bar
per line.  Synthetic generators draw from numpy's PCG64 bit generator
(``numpy.random.Generator(PCG64(seed))``) so fixtures are reproducible for a
given numpy release.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_HEADER = ("date", "open", "high", "low", "close", "volume")
FEATURES = ("open", "high", "low", "close")


class DataError(ValueError):
    """Raised for malformed or inconsistent market data."""


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float = 0.0

    def check(self) -> str | None:
        """Return a description of the first violated invariant, or None."""
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) for p in prices) or not math.isfinite(self.volume):
            return "non-finite value"
        if min(prices) <= 0:
            return "non-positive price"
        if self.high < max(self.open, self.close) or self.low > min(self.open, self.close):
            return "OHLC invariant violated"
        if self.volume < 0:
            return "negative volume"
        return None


@dataclass(frozen=True)
class PriceSeries:
    bars: tuple[OhlcBar, ...]
    symbol: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        for k, bar in enumerate(self.bars):
            problem = bar.check()
            if problem:
                raise DataError(f"{problem} at bar {k}")
        for k in range(1, len(self.bars)):
            if self.bars[k].date <= self.bars[k - 1].date:
                raise DataError(f"dates not strictly increasing at bar {k}")

    def __len__(self) -> int:
        return len(self.bars)

    @cached_property
    def ohlc(self) -> np.ndarray:
        """(len, 4) array of open, high, low, close."""
        return np.array([[b.open, b.high, b.low, b.close] for b in self.bars], dtype=float).reshape(-1, 4)

    @property
    def closes(self) -> np.ndarray:
        return self.ohlc[:, 3]

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    @cached_property
    def log_returns(self) -> np.ndarray:
        """(len - 1, 4) array; row k holds ln(x[k+1] / x[k]) for O, H, L, C."""
        if len(self.bars) < 2:
            raise DataError("series too short")
        return np.diff(np.log(self.ohlc), axis=0)

    def between(self, start: dt.date | None = None, end: dt.date | None = None) -> "PriceSeries":
        """Bars with start <= date <= end (either bound optional)."""
        bars = [b for b in self.bars
                if (start is None or b.date >= start) and (end is None or b.date <= end)]
        return PriceSeries(tuple(bars), self.symbol)


@dataclass(frozen=True)
class FeatureWindow:
    """n x 4 matrix of log returns; row 0 is the most recent step."""

    matrix: np.ndarray = field(repr=False)
    t_index: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def load_csv(path: str | Path, symbol: str | None = None) -> PriceSeries:
    """Read a ``date,open,high,low,close,volume`` file into a validated series."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    bars: list[OhlcBar] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("series too short")
        if tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise DataError(f"unexpected header at line 1: {','.join(header)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(f"malformed row at line {line}")
            try:
                bar = OhlcBar(_parse_date(row[0]), *(float(v) for v in row[1:]))
            except ValueError as exc:
                raise DataError(f"malformed row at line {line}: {exc}") from None
            problem = bar.check()
            if problem:
                raise DataError(f"{problem} at line {line}")
            if bars and bar.date <= bars[-1].date:
                kind = "duplicate" if bar.date == bars[-1].date else "non-monotonic"
                raise DataError(f"{kind} date at line {line}")
            bars.append(bar)
    if len(bars) < 2:
        raise DataError("series too short")
    return PriceSeries(tuple(bars), symbol if symbol is not None else path.stem)


def write_csv(series: PriceSeries, path: str | Path) -> None:
    # repr() gives the shortest string that round-trips the float exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for b in series.bars:
            writer.writerow([b.date.isoformat(), *(repr(float(v)) for v in (b.open, b.high, b.low, b.close, b.volume))])


def feature_window(series: PriceSeries, t: int, n: int) -> FeatureWindow:
    """Log-return window ending at bar ``t``.

    Row ``i - 1`` (i = 1..n) holds ln(x[t-i+1] / x[t-i]) for each of O, H, L, C,
    so the first row is the most recent return.
    """
    if n < 1:
        raise ValueError("window length must be >= 1")
    if t < n or t >= len(series):
        raise DataError(f"insufficient history for window of {n} ending at bar {t}")
    rows = series.log_returns[t - n:t][::-1]
    return FeatureWindow(np.ascontiguousarray(rows), t)


def all_windows(series: PriceSeries, n: int) -> np.ndarray:
    """Stack of windows for t = n .. len-1, shape (len - n, n, 4)."""
    if len(series) < n + 1:
        raise DataError(f"series too short for window {n}")
    r = series.log_returns
    idx = np.arange(n, len(series))[:, None] - 1 - np.arange(n)[None, :]
    return r[idx]


def _business_days(start: dt.date, count: int) -> list[dt.date]:
    days, d = [], start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def _bars_from_closes(closes: Sequence[float], dates: Sequence[dt.date],
                      band: Sequence[float] | None = None) -> tuple[OhlcBar, ...]:
    bars = []
    prev = closes[0]
    for k, c in enumerate(closes):
        o = prev
        hi, lo = max(o, c), min(o, c)
        if band is not None:
            hi *= math.exp(band[k])
            lo *= math.exp(-band[k])
        bars.append(OhlcBar(dates[k], float(o), float(hi), float(lo), float(c), 0.0))
        prev = c
    return tuple(bars)


def gbm_series(s0: float, mu: float, sigma: float, dt_years: float, length: int, seed: int,
               symbol: str = "GBM", start: dt.date = dt.date(2000, 1, 3)) -> PriceSeries:
    """Geometric Brownian motion closes with synthesized OHLC bars.

    ``close[k+1] = close[k] * exp((mu - sigma^2/2) dt + sigma sqrt(dt) z_k)``.
    Open is the previous close; high/low extend the open-close range by a
    multiplicative band ``exp(+-0.5 sigma sqrt(dt) |z'_k|)`` from a second draw.
    """
    if s0 <= 0 or sigma < 0 or length < 2 or dt_years <= 0:
        raise ValueError("gbm_series requires s0 > 0, sigma >= 0, dt > 0, length >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(length - 1)
    zb = np.abs(rng.standard_normal(length))
    drift = (mu - 0.5 * sigma**2) * dt_years
    steps = drift + sigma * math.sqrt(dt_years) * z
    closes = s0 * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
    band = 0.5 * sigma * math.sqrt(dt_years) * zb
    return PriceSeries(_bars_from_closes(closes, _business_days(start, length), band), symbol)


def sinusoid_series(s0: float, amplitude: float, period: float, length: int,
                    symbol: str = "SINE", start: dt.date = dt.date(2000, 1, 3)) -> PriceSeries:
    """Deterministic ``close[k] = s0 + amplitude * sin(2 pi k / period)``."""
    if amplitude >= s0:
        raise ValueError("amplitude must be below s0 to keep prices positive")
    if length < 2 or period <= 0:
        raise ValueError("sinusoid_series requires length >= 2 and period > 0")
    k = np.arange(length)
    closes = s0 + amplitude * np.sin(2.0 * np.pi * k / period)
    return PriceSeries(_bars_from_closes(closes, _business_days(start, length)), symbol)


def series_from_closes(closes: Sequence[float], symbol: str = "",
                       start: dt.date = dt.date(2000, 1, 3)) -> PriceSeries:
    """Bars whose open is the previous close and whose high/low span open and close."""
    return PriceSeries(_bars_from_closes(list(closes), _business_days(start, len(closes))), symbol)
