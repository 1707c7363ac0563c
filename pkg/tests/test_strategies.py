import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadqn.actions import Action
from qadqn.backtest import run
from qadqn.data import OhlcBar, gbm_series, series_from_closes
from qadqn.strategies import (DualThrustParams, DualThrustPolicy, ThrustLines, buy_and_hold,
                              dual_thrust_lines, dual_thrust_signal)


def hist(hh, lc, hc, ll):
    # four bars realising the given extremes
    return np.array([[100, hh, 99, hc], [100, 101, ll, lc], [100, 101, 99, 100], [100, 101, 99, 100]], float)


def test_lines_hand_example():
    lines = dual_thrust_lines(hist(110, 100, 108, 95), 105.0)
    assert lines.range == 13
    assert lines.buy_line == pytest.approx(115.4, abs=1e-12)
    assert lines.sell_line == pytest.approx(99.8, abs=1e-12)


def test_lines_accept_bars_and_degenerate():
    import datetime as dt
    bars = [OhlcBar(dt.date(2020, 1, k + 1), 50, 50, 50, 50) for k in range(4)]
    lines = dual_thrust_lines(bars, 50.0)
    assert lines.buy_line == lines.sell_line == 50.0
    with pytest.raises(ValueError):
        dual_thrust_lines([], 50.0)


def test_symmetric_when_k_equal():
    lines = dual_thrust_lines(hist(110, 100, 108, 95), 105.0, DualThrustParams(0.5, 0.5))
    assert lines.buy_line - lines.open == pytest.approx(lines.open - lines.sell_line, abs=1e-12)


def test_signals():
    lines = ThrustLines(13, 115.4, 99.8, 105)
    assert dual_thrust_signal(116, lines, long=False) == Action.BUY
    assert dual_thrust_signal(99, lines, long=True) == Action.SELL
    for long in (False, True):
        assert dual_thrust_signal(105, lines, long) == Action.SIT
    assert dual_thrust_signal(116, lines, long=True) == Action.SIT
    assert dual_thrust_signal(99, lines, long=False) == Action.SIT


def brute_force_signals(series, k1=0.8, k2=0.4, lb=4):
    """Independent bar-by-bar recomputation from raw bar fields."""
    bars = series.bars
    long = False
    out = []
    for t in range(lb, len(bars) - 1):
        prev = bars[t - lb:t]
        hh = max(b.high for b in prev)
        ll = min(b.low for b in prev)
        hc = max(b.close for b in prev)
        lc = min(b.close for b in prev)
        rng_ = max(hh - lc, hc - ll)
        o, c = bars[t].open, bars[t].close
        if not long and c > o + k1 * rng_:
            out.append((t, "buy"))
            long = True
        elif long and c < o - k2 * rng_:
            out.append((t, "sell"))
            long = False
    if long:
        out.append((len(bars) - 1, "sell"))
    return out


def test_matches_brute_force_on_gbm():
    s = gbm_series(100, 0.05, 0.4, 1 / 252, 400, seed=21)
    _, log = run(DualThrustPolicy(), s, commission=0.0)
    assert [(r.bar, r.action.label) for r in log] == brute_force_signals(s)


@given(st.integers(0, 10_000), st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def test_raising_k1_never_adds_breakouts(seed, k1, bump):
    s = gbm_series(100, 0.0, 0.5, 1 / 252, 80, seed=seed)
    def breakouts(k):
        pol = DualThrustPolicy(DualThrustParams(k, 0.4))
        return sum(float(s.ohlc[t, 3]) > pol.lines(s, t).buy_line for t in range(4, len(s)))
    assert breakouts(k1 + bump) <= breakouts(k1)


def test_buy_and_hold_examples():
    r, log = buy_and_hold(series_from_closes([100.0, 150.0]), commission=0.0)
    assert r.return_pct == pytest.approx(50.0, abs=1e-12)
    r, log = buy_and_hold(series_from_closes([100.0, 150.0]), commission=0.002)
    assert r.return_pct / 100 == pytest.approx(1.5 * 0.998**2 - 1, abs=1e-12)
    r, _ = buy_and_hold(series_from_closes([100.0] * 10), commission=0.0)
    assert r.return_pct == 0
    with pytest.raises(ValueError):
        buy_and_hold(series_from_closes([100.0])[:0] if False else series_from_closes([100.0]))


def test_buy_and_hold_one_buy_at_most_one_sell():
    s = gbm_series(100, 0.05, 0.2, 1 / 252, 200, seed=4)
    _, log = buy_and_hold(s)
    assert log.count(Action.BUY) == 1 and log.count(Action.SELL) <= 1


def test_params_validation():
    with pytest.raises(ValueError):
        DualThrustParams(k1=0)
    with pytest.raises(ValueError):
        DualThrustParams(lookback=0)
