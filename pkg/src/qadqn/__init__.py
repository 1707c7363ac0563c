"""Hybrid quantum-classical deep Q-learning for single-asset trading.

Statevector circuit simulation, a quantum multi-head self-attention network,
prioritized-replay Q-learning with Lion updates, and a commission-aware
backtester.
"""

from .actions import Action
from .backtest import BacktestReport, TradeLog, TradingEnv, run
from .config import ConfigError, RunConfig
from .data import DataError, PriceSeries, gbm_series, load_csv, sinusoid_series
from .network import NetConfig, NetworkParams, init_params, load_model, q_values, save_model
from .strategies import DualThrustParams, DualThrustPolicy, buy_and_hold
from .training import TrainConfig, train

__version__ = "0.1.0"
