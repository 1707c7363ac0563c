"""Command-line entry point: synth, train, backtest, compare, plot, gradcheck.

Exit codes: 0 success, 1 gradient check failure, 2 configuration error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import math
import sys
from pathlib import Path

from .agent import GreedyQPolicy
from .backtest import BacktestReport, TradeLog, run
from .config import ConfigError, RunConfig
from .data import DataError, PriceSeries, gbm_series, load_csv, sinusoid_series, write_csv
from .gradcheck import check_network, check_postnet
from .network import NetworkParams, load_model, save_model
from .plotting import plot_trades
from .strategies import DualThrustParams, DualThrustPolicy, buy_and_hold
from .training import TrainingError, train, write_episode_log

log = logging.getLogger("qadqn")

EXIT_GRADCHECK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3, 4


# -- helpers ----------------------------------------------------------------

def _config(args) -> RunConfig:
    base = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {
        "seed": args.seed,
        "data": getattr(args, "data", None),
        "episodes": getattr(args, "episodes", None),
        "commission": getattr(args, "commission", None),
        "date_from": getattr(args, "date_from", None),
        "date_to": getattr(args, "date_to", None),
    }
    return base.replace(**overrides)


def _date(text: str | None, flag: str) -> dt.date | None:
    if text is None:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"{flag} expects YYYY-MM-DD, got {text!r}") from None


def _series(cfg: RunConfig, min_bars: int) -> PriceSeries:
    if not cfg.data:
        raise ConfigError("no data file given (use --data or the 'data' config key)")
    series = load_csv(cfg.data)
    start, end = _date(cfg.date_from, "--from"), _date(cfg.date_to, "--to")
    if start and end and start > end:
        raise DataError(f"empty date range: {start} is after {end}")
    if start or end:
        first, last = series.dates[0], series.dates[-1]
        if (start and start > last) or (end and end < first):
            raise DataError(f"date range {start or '...'} to {end or '...'} lies outside the data "
                            f"({first} to {last})")
        series = series.between(start, end)
    if len(series) < min_bars:
        raise DataError(f"series too short: {len(series)} bars in range, need at least {min_bars}")
    return series


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(path: str, cfg: RunConfig, explicit_config: bool) -> NetworkParams:
    p = Path(path)
    if not p.exists():
        raise DataError(f"model file not found: {p}")
    try:
        params, _ = load_model(p)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read model {p}: {exc}") from None
    if explicit_config:
        mc = params.config
        if (mc.window, mc.qubits) != (cfg.window, cfg.qubits):
            raise ConfigError(f"model/config mismatch: model has window {mc.window}, {mc.qubits} qubits; "
                              f"config has window {cfg.window}, {cfg.qubits} qubits")
    return params


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and not math.isfinite(v)) else f"{v:.4f}"


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.kind == "gbm":
        series = gbm_series(args.s0, args.mu, args.sigma, 1 / 252, args.length,
                            args.seed if args.seed is not None else 0, symbol="GBM")
    else:
        series = sinusoid_series(args.s0, args.amplitude, args.period, args.length)
    out = Path(args.out or f"{args.kind}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out)
    print(f"wrote {len(series)} bars to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    series = _series(cfg, cfg.window + 2)
    out = _out_dir(args, cfg)
    params, logs = train(series, cfg.train_config(), cfg.net_config())
    save_model(params, out / "model.json", extra=cfg.to_dict())
    write_episode_log(logs, out / "episodes.csv")
    cfg.write_json(out / "config.json")
    if logs:
        last = logs[-1]
        print(f"episode {last.episode}/{cfg.episodes}: cumulative reward {last.cum_reward:.6f}, "
              f"mean loss {last.mean_loss:.6g}, steps {last.steps}")
    else:
        print("0 episodes: wrote initial parameters")
    print(f"model written to {out / 'model.json'}")
    return 0


def _greedy_report(params: NetworkParams, series: PriceSeries, cfg: RunConfig) -> tuple[BacktestReport, TradeLog]:
    return run(GreedyQPolicy(params), series, cfg.commission, cfg.initial_cash)


def cmd_backtest(args) -> int:
    cfg = _config(args)
    params = _load_model(args.model, cfg, bool(args.config))
    series = _series(cfg, params.config.window + 2)
    out = _out_dir(args, cfg)
    report, trades = _greedy_report(params, series, cfg)
    report.write_json(out / "report.json")
    trades.write_csv(out / "trades.csv")
    _write_json(out / "backtest_config.json", {**cfg.to_dict(), "model": str(args.model)})
    for k, v in report.to_dict().items():
        print(f"{k:<18} {v if isinstance(v, int) else _fmt(v)}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    params = _load_model(args.model, cfg, bool(args.config))
    start = params.config.window
    series = _series(cfg, start + 2)
    rows = {
        "QADQN": _greedy_report(params, series, cfg)[0],
        "Dual Thrust": run(DualThrustPolicy(DualThrustParams(cfg.k1, cfg.k2, cfg.lookback)), series,
                           cfg.commission, cfg.initial_cash, start=start)[0],
        "Buy & Hold": buy_and_hold(series, cfg.commission, start=start, initial_cash=cfg.initial_cash)[0],
    }
    header = f"{'strategy':<12} {'Return %':>10} {'Sharpe':>8} {'Sortino':>8} {'MaxDD %':>8} {'trades':>6}"
    print(header)
    for name, r in rows.items():
        print(f"{name:<12} {_fmt(r.return_pct):>10} {_fmt(r.sharpe):>8} {_fmt(r.sortino):>8} "
              f"{_fmt(r.max_drawdown_pct):>8} {r.trades:>6}")
    if args.out:
        out = _out_dir(args, cfg)
        _write_json(out / "compare.json", {"config": cfg.to_dict(), "first_bar": start,
                                           "strategies": {k: v.to_dict() for k, v in rows.items()}})
    return 0


def cmd_plot(args) -> int:
    series = load_csv(args.data)
    trades_path = Path(args.trades)
    if not trades_path.exists():
        raise DataError(f"trade log not found: {trades_path}")
    try:
        trades = TradeLog.read_csv(trades_path)
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed trade log {trades_path}: {exc}") from None
    out = Path(args.out or "trades.svg")
    plot_trades(series, trades, out, title=args.title)
    print(f"wrote {out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _config(args)
    seed = cfg.seed
    tol_shift = args.tol if args.tol is not None else args.tol_shift
    tol_net = args.tol if args.tol is not None else args.tol_network
    reports = [
        check_postnet(trials=args.trials, tol=tol_shift, seed=seed, qubits=cfg.qubits, layers=cfg.layers),
        check_network(tol=tol_net, seed=seed, config=cfg.net_config()),
    ]
    ok = True
    for r in reports:
        print("\n".join(r.lines()))
        if not r.passed:
            ok = False
            print(f"  tolerance breached in: {', '.join(r.failing_groups())}")
    return 0 if ok else EXIT_GRADCHECK


# -- parser -----------------------------------------------------------------

def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default, help="seed override (unsigned 64-bit)")
    parser.add_argument("--out", default=default, help="output directory (or file for plot/synth)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qadqn", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, dates=True):
        p.add_argument("--data", help="OHLC CSV (date,open,high,low,close,volume)")
        if dates:
            p.add_argument("--from", dest="date_from", help="first date, YYYY-MM-DD")
            p.add_argument("--to", dest="date_to", help="last date, YYYY-MM-DD")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic OHLC CSV")
    p.add_argument("--kind", choices=("gbm", "sinusoid"), default="gbm")
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--amplitude", type=float, default=10.0)
    p.add_argument("--period", type=float, default=50.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a model; writes model.json and episodes.csv")
    data_flags(p)
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_train)

    for name, func, text in (("backtest", cmd_backtest, "greedy backtest; writes report.json and trades.csv"),
                             ("compare", cmd_compare, "QADQN vs Dual Thrust vs Buy & Hold")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--model", required=True)
        data_flags(p)
        p.add_argument("--commission", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("plot", parents=[common], help="SVG price chart with trade markers")
    p.add_argument("--trades", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    p.add_argument("--tol", type=float, help="one tolerance for both suites")
    p.add_argument("--tol-shift", type=float, default=1e-6)
    p.add_argument("--tol-network", type=float, default=1e-3)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
