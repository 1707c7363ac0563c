"""Rule-based baselines: Dual Thrust breakout and Buy & Hold."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import Action
from .backtest import BacktestReport, TradeLog, run
from .data import OhlcBar, PriceSeries


@dataclass(frozen=True)
class DualThrustParams:
    k1: float = 0.8
    k2: float = 0.4
    lookback: int = 4

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.lookback < 1:
            raise ValueError("lookback must be >= 1")


@dataclass(frozen=True)
class ThrustLines:
    range: float
    buy_line: float
    sell_line: float
    open: float


def dual_thrust_lines(history, open_price: float, p: DualThrustParams = DualThrustParams()) -> ThrustLines:
    """Breakout lines from the previous ``lookback`` bars and today's open.

    ``history`` is a sequence of :class:`OhlcBar` or an (m, 4) OHLC array.
    Range = max(HH - LC, HC - LL); BuyLine = open + k1 Range; SellLine = open - k2 Range.
    """
    if len(history) == 0:
        raise ValueError("empty history")
    if len(history) != p.lookback:
        raise ValueError(f"history must hold exactly {p.lookback} bars")
    if isinstance(history[0], OhlcBar):
        ohlc = np.array([[b.open, b.high, b.low, b.close] for b in history])
    else:
        ohlc = np.asarray(history, dtype=float)
    hh, ll = ohlc[:, 1].max(), ohlc[:, 2].min()
    hc, lc = ohlc[:, 3].max(), ohlc[:, 3].min()
    rng, o = float(max(hh - lc, hc - ll)), float(open_price)
    return ThrustLines(rng, o + p.k1 * rng, o - p.k2 * rng, o)


def dual_thrust_signal(price: float, lines: ThrustLines, long: bool) -> Action:
    if not long and price > lines.buy_line:
        return Action.BUY
    if long and price < lines.sell_line:
        return Action.SELL
    return Action.SIT


class DualThrustPolicy:
    """Long-only Dual Thrust, evaluated on each bar's close."""

    def __init__(self, params: DualThrustParams = DualThrustParams()):
        self.params = params
        self.warmup = params.lookback

    def lines(self, series: PriceSeries, t: int) -> ThrustLines:
        lb = self.params.lookback
        ohlc = series.ohlc
        return dual_thrust_lines(ohlc[t - lb:t], float(ohlc[t, 0]), self.params)

    def __call__(self, series: PriceSeries, t: int, long: bool) -> Action:
        return dual_thrust_signal(float(series.ohlc[t, 3]), self.lines(series, t), long)


class BuyAndHoldPolicy:
    warmup = 0

    def __call__(self, series: PriceSeries, t: int, long: bool) -> Action:
        return Action.SIT if long else Action.BUY


class RandomPolicy:
    """Uniform random actions from a seeded generator (a baseline for sanity checks)."""

    warmup = 0

    def __init__(self, seed: int):
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def __call__(self, series: PriceSeries, t: int, long: bool) -> Action:
        return Action(int(self.rng.integers(3)))


def buy_and_hold(series: PriceSeries, commission: float = 0.002, start: int = 0,
                 initial_cash: float = 10_000.0) -> tuple[BacktestReport, TradeLog]:
    """Buy at the close of bar ``start`` and liquidate at the final close."""
    if len(series) < 2:
        raise ValueError("series too short")
    return run(BuyAndHoldPolicy(), series, commission, initial_cash, start=start)
