"""Long-only, all-in/all-out trading environment and performance metrics.

Trades fill at the decision bar's close.  A buy converts all cash into units
after commission; a sell converts all units back to cash after commission.
Actions that cannot execute (buy while long, sell while flat) become sits.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .actions import Action
from .data import DataError, PriceSeries, all_windows

log = logging.getLogger(__name__)

PERIODS_PER_YEAR = 252
REPORT_KEYS = ("return_pct", "sharpe", "sortino", "max_drawdown_pct", "trades")


@dataclass(frozen=True)
class Portfolio:
    cash: float
    units: float = 0.0

    @property
    def long(self) -> bool:
        return self.units > 0

    def equity(self, price: float) -> float:
        return self.cash + self.units * price


def step(portfolio: Portfolio, action: Action, price: float,
         commission_rate: float) -> tuple[Portfolio, Action]:
    """Apply one action at ``price``; returns the new portfolio and what executed."""
    if price <= 0:
        raise ValueError("price must be positive")
    if not 0 <= commission_rate < 1:
        raise ValueError("commission rate must be in [0, 1)")
    if action == Action.BUY and not portfolio.long:
        units = portfolio.cash * (1.0 - commission_rate) / price
        return Portfolio(0.0, units), Action.BUY
    if action == Action.SELL and portfolio.long:
        cash = portfolio.units * price * (1.0 - commission_rate)
        return Portfolio(cash, 0.0), Action.SELL
    return portfolio, Action.SIT


def reward(prev_equity: float, equity: float, clip: float) -> float:
    """Log growth of equity, clipped to [-clip, clip]."""
    if prev_equity <= 0 or equity <= 0:
        raise ValueError("equities must be positive")
    r = math.log(equity / prev_equity)
    return min(max(r, -clip), clip)


# -- metrics ------------------------------------------------------------------

def max_drawdown(equity) -> float:
    """Largest (running peak - value) / running peak, as a fraction."""
    eq = np.asarray(equity, dtype=float)
    if eq.size == 0:
        raise ValueError("empty equity curve")
    if np.any(eq <= 0):
        raise ValueError("equity values must be positive")
    peak = np.maximum.accumulate(eq)
    return float(np.max((peak - eq) / peak))


def sharpe(returns, periods_per_year: int = PERIODS_PER_YEAR) -> float:
    """Annualized mean / sample std with zero risk-free rate; NaN when undefined."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        log.warning("Sharpe ratio undefined: fewer than two returns")
        return math.nan
    sd = r.std(ddof=1)
    if sd == 0 or not np.isfinite(sd):
        log.warning("Sharpe ratio undefined: returns have zero variance")
        return math.nan
    return float(r.mean() / sd * math.sqrt(periods_per_year))


def sortino(returns, periods_per_year: int = PERIODS_PER_YEAR) -> float:
    """Annualized mean / sqrt(mean(min(r, 0)^2)); NaN when no return is negative."""
    r = np.asarray(returns, dtype=float)
    if r.size == 0 or not np.any(r < 0):
        log.warning("Sortino ratio undefined: no negative returns")
        return math.nan
    downside = math.sqrt(np.mean(np.minimum(r, 0.0) ** 2))
    return float(r.mean() / downside * math.sqrt(periods_per_year))


# -- trade log and report -------------------------------------------------------

@dataclass(frozen=True)
class TradeRecord:
    bar: int
    date: str
    action: Action
    price: float
    units: float
    commission: float


@dataclass
class TradeLog:
    records: list[TradeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def count(self, action: Action) -> int:
        return sum(r.action == action for r in self.records)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bar", "date", "action", "price", "units", "commission"])
            for r in self.records:
                w.writerow([r.bar, r.date, r.action.label, repr(float(r.price)), repr(float(r.units)),
                            repr(float(r.commission))])

    @classmethod
    def read_csv(cls, path: str | Path) -> "TradeLog":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([TradeRecord(int(r["bar"]), r["date"], Action.parse(r["action"]), float(r["price"]),
                                float(r["units"]), float(r["commission"])) for r in rows])


@dataclass
class BacktestReport:
    return_pct: float
    sharpe: float
    sortino: float
    max_drawdown_pct: float
    trades: int
    equity_curve: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v
        return {k: clean(getattr(self, k)) for k in REPORT_KEYS}

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def report_from_equity(equity, trades: int, periods_per_year: int = PERIODS_PER_YEAR) -> BacktestReport:
    eq = np.asarray(equity, dtype=float)
    rets = eq[1:] / eq[:-1] - 1.0
    return BacktestReport(
        return_pct=float((eq[-1] / eq[0] - 1.0) * 100.0),
        sharpe=sharpe(rets, periods_per_year),
        sortino=sortino(rets, periods_per_year),
        max_drawdown_pct=max_drawdown(eq) * 100.0,
        trades=trades,
        equity_curve=eq,
    )


# -- environment ------------------------------------------------------------------

class Policy(Protocol):
    warmup: int

    def __call__(self, series: PriceSeries, t: int, long: bool) -> Action: ...


class TradingEnv:
    """Bar-by-bar environment over one series.

    The state at bar ``t`` is the log-return window ending at ``t``.  Stepping
    trades at close[t], then marks equity at close[t+1]; the reward is the
    clipped log growth of equity over that interval.
    """

    def __init__(self, series: PriceSeries, window: int, commission: float = 0.002,
                 reward_clip: float = 0.05, initial_cash: float = 1.0):
        if len(series) < window + 2:
            raise DataError(f"series too short: need at least {window + 2} bars")
        self.series = series
        self.window = window
        self.commission = commission
        self.reward_clip = reward_clip
        self.initial_cash = initial_cash
        self.windows = all_windows(series, window)     # windows[k] ends at bar window + k
        self.closes = series.closes
        self.reset()

    @property
    def steps_per_episode(self) -> int:
        return len(self.series) - self.window - 1

    def reset(self) -> np.ndarray:
        self.t = self.window
        self.portfolio = Portfolio(self.initial_cash)
        return self.state

    @property
    def state(self) -> np.ndarray:
        return self.windows[self.t - self.window]

    @property
    def long(self) -> bool:
        return self.portfolio.long

    def step(self, action: Action) -> tuple[float, np.ndarray, bool, Action]:
        """Returns (reward, next_state, done, executed_action)."""
        if self.t >= len(self.series) - 1:
            raise RuntimeError("episode finished; call reset()")
        price = self.closes[self.t]
        prev_equity = self.portfolio.equity(price)
        self.portfolio, executed = step(self.portfolio, Action(action), price, self.commission)
        self.t += 1
        r = reward(prev_equity, self.portfolio.equity(self.closes[self.t]), self.reward_clip)
        done = self.t == len(self.series) - 1
        return r, self.state, done, executed


def run(policy: Policy | Callable, series: PriceSeries, commission: float = 0.002,
        initial_cash: float = 10_000.0, start: int | None = None,
        periods_per_year: int = PERIODS_PER_YEAR) -> tuple[BacktestReport, TradeLog]:
    """Evaluate a policy bar by bar and liquidate any open position at the last close.

    The equity curve starts with the cash held before the first decision and
    then records the mark-to-market value at each subsequent close.
    """
    warmup = getattr(policy, "warmup", 0)
    first = max(warmup, start or 0)
    if len(series) < first + 2:
        raise DataError(f"series too short: need at least {first + 2} bars")
    closes = series.closes
    dates = series.dates
    book = Portfolio(initial_cash)
    trades = TradeLog()
    equity = [initial_cash]
    for t in range(first, len(series) - 1):
        action = Action(policy(series, t, book.long))
        prev = book
        book, executed = step(book, action, closes[t], commission)
        if executed != Action.SIT:
            fee = prev.cash * commission if executed == Action.BUY else prev.units * closes[t] * commission
            trades.records.append(TradeRecord(t, dates[t].isoformat(), executed, float(closes[t]),
                                              book.units if executed == Action.BUY else prev.units, fee))
        equity.append(book.equity(closes[t + 1]))
    last = len(series) - 1
    if book.long:
        prev = book
        book, _ = step(book, Action.SELL, closes[last], commission)
        trades.records.append(TradeRecord(last, dates[last].isoformat(), Action.SELL, float(closes[last]),
                                          prev.units, prev.units * closes[last] * commission))
        equity[-1] = book.cash
    return report_from_equity(equity, len(trades), periods_per_year), trades
