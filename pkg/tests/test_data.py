import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadqn.data import (DataError, OhlcBar, PriceSeries, all_windows, feature_window, gbm_series,
                        load_csv, series_from_closes, sinusoid_series, write_csv)

HEADER = "date,open,high,low,close,volume\n"


def write(tmp_path, body, name="d.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body, encoding="utf-8")
    return p


def test_load_row_maps_fields(tmp_path):
    p = write(tmp_path, "2020-01-02,100,101,99,100.5,1000\n2020-01-03,100.5,102,100,101,900\n")
    s = load_csv(p)
    b = s.bars[0]
    assert (b.date, b.open, b.high, b.low, b.close, b.volume) == (dt.date(2020, 1, 2), 100, 101, 99, 100.5, 1000)
    assert len(s) == 2


def test_high_below_low_reports_line(tmp_path):
    p = write(tmp_path, "2020-01-02,100,101,99,100.5,1000\n2020-01-03,100,98,99,100,5\n")
    with pytest.raises(DataError, match="OHLC invariant violated at line 3"):
        load_csv(p)


def test_empty_file_too_short(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match="series too short"):
        load_csv(p)
    with pytest.raises(DataError, match="series too short"):
        load_csv(write(tmp_path, ""))


@pytest.mark.parametrize("body,msg", [
    ("2020-01-02,100,101,99\n", "malformed row at line 2"),
    ("2020-01-02,abc,101,99,100,1\n", "malformed row at line 2"),
    ("2020-01-02,100,101,99,100,1\n2020-01-02,100,101,99,100,1\n", "duplicate date at line 3"),
    ("2020-01-03,100,101,99,100,1\n2020-01-02,100,101,99,100,1\n", "non-monotonic date at line 3"),
    ("2020-01-02,0,0,0,0,1\n2020-01-03,1,1,1,1,1\n", "non-positive price at line 2"),
])
def test_load_errors(tmp_path, body, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(write(tmp_path, body))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("day,o,h,l,c,v\n2020-01-02,1,1,1,1,1\n", encoding="utf-8")
    with pytest.raises(DataError, match="header"):
        load_csv(p)


def test_csv_round_trip_bit_exact(tmp_path):
    s = gbm_series(100, 0.05, 0.3, 1 / 252, 60, seed=9)
    write_csv(s, tmp_path / "a.csv")
    back = load_csv(tmp_path / "a.csv", symbol=s.symbol)
    assert back == s
    write_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_feature_window_two_bar_example():
    s = series_from_closes([100.0, 110.0])
    w = feature_window(s, 1, 1)
    assert w.matrix.shape == (1, 4)
    assert w.matrix[0, 3] == pytest.approx(0.0953102, abs=1e-7)
    assert w.matrix[0, 3] == pytest.approx(math.log(1.1), abs=1e-15)
    assert w.t_index == 1


def test_feature_window_constant_prices_zero():
    s = series_from_closes([50.0] * 30)
    assert np.all(feature_window(s, 24, 24).matrix == 0)


def test_feature_window_needs_history():
    s = series_from_closes([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(DataError):
        feature_window(s, 2, 3)


def test_feature_window_row_order_oracle():
    s = gbm_series(100, 0.0, 0.2, 1 / 252, 40, seed=1)
    ohlc = s.ohlc
    t, n = 30, 6
    w = feature_window(s, t, n).matrix
    for i in range(1, n + 1):
        expect = [math.log(ohlc[t - i + 1, j] / ohlc[t - i, j]) for j in range(4)]
        assert np.allclose(w[i - 1], expect, rtol=0, atol=1e-15)


def test_all_windows_matches_feature_window():
    s = gbm_series(100, 0.0, 0.2, 1 / 252, 50, seed=2)
    ws = all_windows(s, 24)
    assert ws.shape == (26, 24, 4)
    for k in (0, 7, 25):
        assert np.array_equal(ws[k], feature_window(s, 24 + k, 24).matrix)


@given(st.floats(0.01, 100.0))
def test_window_scale_invariance(lam):
    s = gbm_series(100, 0.05, 0.2, 1 / 252, 30, seed=3)
    bars = tuple(OhlcBar(b.date, b.open * lam, b.high * lam, b.low * lam, b.close * lam) for b in s.bars)
    scaled = PriceSeries(bars)
    assert np.allclose(feature_window(scaled, 29, 24).matrix, feature_window(s, 29, 24).matrix, atol=1e-12)


def test_gbm_zero_vol_constant():
    s = gbm_series(100, 0.0, 0.0, 1 / 252, 20, seed=0)
    assert np.all(s.closes == 100.0)


def test_gbm_deterministic_exponential():
    s = gbm_series(100, 0.1, 0.0, 1.0, 10, seed=0)
    assert np.allclose(s.closes, 100 * np.exp(0.1 * np.arange(10)), rtol=1e-13)


def test_gbm_seed_reproducible_and_documented_generator():
    a = gbm_series(100, 0.05, 0.2, 1 / 252, 100, seed=42)
    b = gbm_series(100, 0.05, 0.2, 1 / 252, 100, seed=42)
    assert a == b
    # closes follow from the first PCG64 draws, independently recomputed
    z = np.random.Generator(np.random.PCG64(42)).standard_normal(99)
    dt_ = 1 / 252
    expect = 100 * np.exp(np.concatenate([[0], np.cumsum((0.05 - 0.02) * dt_ + 0.2 * math.sqrt(dt_) * z)]))
    assert np.allclose(a.closes, expect, rtol=1e-12)
    assert gbm_series(100, 0.05, 0.2, 1 / 252, 100, seed=43) != a


def test_gbm_bars_valid():
    s = gbm_series(100, 0.05, 0.4, 1 / 252, 300, seed=5)
    assert all(b.check() is None for b in s.bars)
    assert np.all(s.ohlc[1:, 0] == s.ohlc[:-1, 3])


def test_sinusoid_examples():
    s = sinusoid_series(100, 10, 40, 50)
    assert s.closes[0] == 100
    assert s.closes[10] == pytest.approx(110, abs=1e-12)
    with pytest.raises(ValueError):
        sinusoid_series(10, 10, 40, 50)


def test_series_rejects_unsorted_dates():
    b1 = OhlcBar(dt.date(2020, 1, 2), 1, 1, 1, 1)
    b0 = OhlcBar(dt.date(2020, 1, 1), 1, 1, 1, 1)
    with pytest.raises(DataError):
        PriceSeries((b1, b0))


def test_between_filters_inclusive():
    s = series_from_closes([1.0, 2.0, 3.0, 4.0, 5.0])
    d = s.dates
    sub = s.between(d[1], d[3])
    assert list(sub.closes) == [2.0, 3.0, 4.0]
