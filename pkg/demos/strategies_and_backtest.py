"""
Dual Thrust, Buy & Hold and the backtester
==========================================

"""

from qadqn.backtest import run
from qadqn.data import gbm_series, series_from_closes
from qadqn.strategies import DualThrustParams, DualThrustPolicy, RandomPolicy, buy_and_hold

series = gbm_series(100, 0.08, 0.3, 1 / 252, 750, seed=5)

# Breakout lines sit k1 and k2 ranges away from the open.
policy = DualThrustPolicy(DualThrustParams(k1=0.8, k2=0.4, lookback=4))
print(policy.lines(series, 100))

# Trades execute at the close with a 0.2% commission per side.
for name, (report, log) in {
    "Dual Thrust": run(policy, series, commission=0.002),
    "Buy & Hold": buy_and_hold(series, commission=0.002),
    "Random": run(RandomPolicy(0), series, commission=0.002),
}.items():
    print(f"{name:<12}", {k: (round(v, 4) if isinstance(v, float) else v) for k, v in report.to_dict().items()})

# Commission arithmetic on two bars: 1.5 * 0.998^2 - 1.
r, _ = buy_and_hold(series_from_closes([100.0, 150.0]))
print("two-bar return %", r.return_pct, "expected", 100 * (1.5 * 0.998 ** 2 - 1))
