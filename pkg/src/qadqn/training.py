"""Deep Q-learning loop with prioritized replay, Huber loss and the Lion optimizer."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .agent import (PrioritizedReplayMemory, Transition, UcbCounts, prepopulate_dual_thrust,
                    state_key, ucb_select)
from .backtest import TradingEnv
from .data import PriceSeries
from .network import NetConfig, NetworkParams, backward, clone_params, forward, init_params, q_values
from .strategies import DualThrustParams

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Numeric failure during training (non-finite loss or parameters)."""


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.95
    episodes: int = 200
    batch_size: int = 32
    target_update: int = 100
    lr: float = 3e-4
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    huber_delta: float = 1.0
    reward_clip: float | None = None        # None -> 1 - gamma
    ucb_c: float = 0.5
    per_alpha: float = 0.6
    per_beta: float = 0.4
    per_beta_final: float = 1.0
    per_eps: float = 0.01
    memory_capacity: int = 10_000
    prepop_capacity: int = 2_000
    prepopulate: bool = True
    commission: float = 0.002
    k1: float = 0.8
    k2: float = 0.4
    lookback: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.batch_size < 1 or self.target_update < 1:
            raise ValueError("batch_size and target_update must be >= 1")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be positive")
        if not 0 <= self.ucb_c <= 1:
            raise ValueError("ucb_c must lie in [0, 1]")

    @property
    def clip(self) -> float:
        return 1.0 - self.gamma if self.reward_clip is None else self.reward_clip

    @property
    def dual_thrust(self) -> DualThrustParams:
        return DualThrustParams(self.k1, self.k2, self.lookback)


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    lr: float = 3e-4
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99

    @classmethod
    def zeros_like(cls, arrays: dict[str, np.ndarray], **kw) -> "OptimizerState":
        return cls({k: np.zeros_like(v) for k, v in arrays.items()}, **kw)


@dataclass
class EpisodeLog:
    episode: int
    cum_reward: float
    mean_loss: float
    steps: int
    explore_rate: float = 0.0     # share of steps where the sampled action was not greedy


def huber(x, delta: float = 1.0):
    """0.5 x^2 for |x| <= delta, delta (|x| - delta / 2) beyond."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    a = np.abs(x)
    return np.where(a <= delta, 0.5 * a * a, delta * (a - 0.5 * delta))


def huber_grad(x, delta: float = 1.0):
    return np.clip(x, -delta, delta)


def lion_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: OptimizerState) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One Lion update.

    c = b1 m + (1 - b1) g;  theta <- theta - lr (sign(c) + wd theta);  m <- b2 m + (1 - b2) g
    """
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ValueError("parameter, gradient and momentum names differ")
    out = {}
    for name, theta in params.items():
        g, m = grads[name], state.m[name]
        if g.shape != theta.shape or m.shape != theta.shape:
            raise ValueError(f"shape mismatch for {name}")
        c = state.beta1 * m + (1.0 - state.beta1) * g
        out[name] = theta - state.lr * (np.sign(c) + state.weight_decay * theta)
        state.m[name] = state.beta2 * m + (1.0 - state.beta2) * g
    return out, state


def td_targets(rewards, next_states, dones, target: NetworkParams, gamma: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    best = q_values(target, np.asarray(next_states)).max(axis=-1)
    return np.where(dones, rewards, rewards + gamma * best)


def td_target(r: float, next_state, done: bool, target: NetworkParams, gamma: float) -> float:
    if done:
        return float(r)
    return float(r + gamma * q_values(target, next_state).max())


@dataclass
class TargetHandle:
    params: NetworkParams


def sync_target(policy: NetworkParams, handle: TargetHandle | None = None) -> TargetHandle:
    """Point the target network at a deep copy of the policy parameters."""
    if handle is None:
        return TargetHandle(clone_params(policy))
    handle.params = clone_params(policy)
    return handle


def batch_loss(params: NetworkParams, target: NetworkParams, batch: list[Transition],
               weights, gamma: float, delta: float):
    """IS-weighted mean Huber loss; returns (loss, td_errors, gradients)."""
    states = np.stack([t.state for t in batch])
    actions = np.array([int(t.action) for t in batch])
    y = td_targets([t.reward for t in batch], np.stack([t.next_state for t in batch]),
                   [t.done for t in batch], target, gamma)
    q, cache = forward(params, states)
    rows = np.arange(len(batch))
    resid = q[rows, actions] - y
    w = np.asarray(weights, dtype=float)
    loss = float(np.mean(w * huber(resid, delta)))
    dq = np.zeros_like(q)
    dq[rows, actions] = w * huber_grad(resid, delta) / len(batch)
    return loss, resid, backward(cache, dq)


def _rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    ucb_seq, per_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(ucb_seq)), np.random.Generator(np.random.PCG64(per_seq))


def train(series: PriceSeries, config: TrainConfig = TrainConfig(), net: NetConfig = NetConfig(),
          params: NetworkParams | None = None,
          on_episode: Callable[[EpisodeLog], None] | None = None) -> tuple[NetworkParams, list[EpisodeLog]]:
    """Train a Q-network on one series; returns the final parameters and per-episode logs."""
    env = TradingEnv(series, net.window, config.commission, config.clip)
    if env.steps_per_episode < 1:
        raise ValueError("series too short for two windows")
    params = init_params(net, config.seed) if params is None else clone_params(params)
    logs: list[EpisodeLog] = []
    if config.episodes == 0:
        return params, logs

    ucb_rng, per_rng = _rngs(config.seed)
    target = sync_target(params)
    memory = PrioritizedReplayMemory(config.memory_capacity, config.per_alpha, config.per_beta,
                                     config.per_eps, config.prepop_capacity)
    if config.prepopulate:
        n = prepopulate_dual_thrust(memory, series, config.dual_thrust, net.window,
                                    config.commission, config.clip)
        log.info("pre-populated replay memory with %d Dual Thrust transitions", n)
    opt = OptimizerState.zeros_like(params.arrays, lr=config.lr, weight_decay=config.weight_decay,
                                    beta1=config.beta1, beta2=config.beta2)
    counts = UcbCounts(config.ucb_c)
    total_steps = config.episodes * env.steps_per_episode
    step = 0

    for episode in range(1, config.episodes + 1):
        state = env.reset()
        done = False
        cum_reward, losses, explored, steps = 0.0, [], 0, 0
        while not done:
            q = q_values(params, state)
            action = ucb_select(q, counts, state_key(state), ucb_rng)
            explored += int(action != int(np.argmax(q)))
            r, next_state, done, _ = env.step(action)
            memory.store(Transition(state, action, r, next_state, done))
            cum_reward += r
            step += 1
            steps += 1
            if len(memory) >= config.batch_size:
                memory.beta = config.per_beta + (config.per_beta_final - config.per_beta) * min(1.0, step / total_steps)
                batch, ids, weights = memory.sample(config.batch_size, per_rng)
                loss, td, grads = batch_loss(params, target.params, batch, weights, config.gamma, config.huber_delta)
                if not math.isfinite(loss):
                    raise TrainingError(f"non-finite loss at episode {episode}, step {step}")
                new_arrays, opt = lion_step(params.arrays, grads, opt)
                params.arrays = new_arrays
                memory.update_priorities(ids, td)
                losses.append(loss)
            if step % config.target_update == 0:
                sync_target(params, target)
            state = next_state
        if not all(np.all(np.isfinite(a)) for a in params.arrays.values()):
            raise TrainingError(f"non-finite parameters after episode {episode}")
        entry = EpisodeLog(episode, cum_reward, float(np.mean(losses)) if losses else math.nan,
                           steps, explored / steps)
        logs.append(entry)
        log.info("episode %d: reward %.5f loss %.6f explore %.3f", episode, cum_reward, entry.mean_loss,
                 entry.explore_rate)
        if on_episode is not None:
            on_episode(entry)
    return params, logs


def write_episode_log(logs: list[EpisodeLog], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "cum_reward", "mean_loss", "steps"])
        for e in logs:
            w.writerow([e.episode, repr(float(e.cum_reward)), repr(float(e.mean_loss)), e.steps])
