"""
Market data: CSV ingestion, synthetic series and feature windows
================================================================

"""

import tempfile
from pathlib import Path

import numpy as np

from qadqn.data import all_windows, feature_window, gbm_series, load_csv, sinusoid_series, write_csv

# A seeded geometric Brownian motion: same seed, same bars.
series = gbm_series(s0=100.0, mu=0.05, sigma=0.2, dt_years=1 / 252, length=300, seed=1)
print(len(series), "bars from", series.dates[0], "to", series.dates[-1])

# Round trip through the OHLC CSV format.
path = Path(tempfile.mkdtemp()) / "gbm.csv"
write_csv(series, path)
again = load_csv(path)
print("round trip exact:", np.array_equal(again.ohlc, series.ohlc))

# A state is the last 24 log returns of open, high, low and close.
w = feature_window(series, 24, 24)
print("window shape", w.matrix.shape, "newest row", np.round(w.matrix[0], 5))

# Every window at once, for batched evaluation.
print("all windows", all_windows(series, 24).shape)

# A sinusoid gives a clean, learnable pattern for smoke tests.
wave = sinusoid_series(100.0, 10.0, 50, 200)
print("sinusoid close range", wave.closes.min().round(2), wave.closes.max().round(2))
