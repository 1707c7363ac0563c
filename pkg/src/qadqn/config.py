"""Run configuration: every tunable in one JSON-serializable record."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .network import NetConfig
from .strategies import DualThrustParams
from .training import TrainConfig


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    # network
    window: int = 24
    qubits: int = 4
    heads: int = 2
    layers: int = 2
    hidden: int = 64
    prenet: tuple[int, ...] = (32, 8)
    # learning
    gamma: float = 0.95
    episodes: int = 200
    batch_size: int = 32
    target_update: int = 100
    lr: float = 3e-4
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    huber_delta: float = 1.0
    reward_clip: float | None = None
    ucb_c: float = 0.5
    per_alpha: float = 0.6
    per_beta: float = 0.4
    per_eps: float = 0.01
    memory_capacity: int = 10_000
    prepop_capacity: int = 2_000
    # trading
    k1: float = 0.8
    k2: float = 0.4
    lookback: int = 4
    commission: float = 0.002
    initial_cash: float = 10_000.0
    seed: int = 0
    # paths
    data: str | None = None
    out: str | None = None
    date_from: str | None = None
    date_to: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prenet", tuple(self.prenet))
        self.validate()

    def validate(self) -> None:
        try:
            self.net_config()
            self.train_config()
            DualThrustParams(self.k1, self.k2, self.lookback)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.window < self.lookback:
            raise ConfigError("window must cover the Dual Thrust lookback")
        if not 0 <= self.commission < 1:
            raise ConfigError("commission must lie in [0, 1)")
        if self.initial_cash <= 0:
            raise ConfigError("initial_cash must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.reward_clip is not None and self.reward_clip <= 0:
            raise ConfigError("reward_clip must be positive")

    def net_config(self) -> NetConfig:
        return NetConfig(window=self.window, hidden=self.hidden, prenet=self.prenet,
                         qubits=self.qubits, heads=self.heads, layers=self.layers)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            gamma=self.gamma, episodes=self.episodes, batch_size=self.batch_size,
            target_update=self.target_update, lr=self.lr, weight_decay=self.weight_decay,
            beta1=self.beta1, beta2=self.beta2, huber_delta=self.huber_delta,
            reward_clip=self.reward_clip, ucb_c=self.ucb_c, per_alpha=self.per_alpha,
            per_beta=self.per_beta, per_eps=self.per_eps, memory_capacity=self.memory_capacity,
            prepop_capacity=self.prepop_capacity, commission=self.commission,
            k1=self.k1, k2=self.k2, lookback=self.lookback, seed=self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prenet"] = list(self.prenet)
        return d

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig.from_dict(d)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
