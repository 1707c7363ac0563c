"""Action selection and replay memories.

Exploration follows an upper-confidence weighting: the greedy action gets
``1 - c + c log(t) / N(s)`` and every other action ``c log(t) / N(s)``, where
``N(s)`` counts visits to a discretized state.  The weights are clamped at zero
and renormalized before sampling.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .actions import ACTIONS, Action
from .backtest import TradingEnv
from .data import PriceSeries, all_windows
from .network import NetworkParams, q_values
from .strategies import DualThrustParams, DualThrustPolicy

log = logging.getLogger(__name__)

AGENT = "agent"
DUAL_THRUST = "dual_thrust"


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: Action
    reward: float
    next_state: np.ndarray
    done: bool
    source: str = AGENT

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if np.shape(self.state) != np.shape(self.next_state):
            raise ValueError("state and next_state shapes differ")


def state_key(window) -> int:
    """Pack the sign pattern (-, 0, +) of the most recent row into a base-3 integer."""
    row = np.asarray(getattr(window, "matrix", window))[0]
    key = 0
    for v in row:
        key = key * 3 + (int(np.sign(v)) + 1)
    return key


@dataclass
class UcbCounts:
    c: float = 0.5
    t: int = 1
    visits: dict = field(default_factory=lambda: defaultdict(int))

    def __post_init__(self):
        if not 0 <= self.c <= 1:
            raise ValueError("exploration constant must lie in [0, 1]")
        if self.t < 1:
            raise ValueError("step counter starts at 1")


def ucb_weights(q, c: float, t: int, visits: int) -> np.ndarray:
    """Normalized selection probabilities for one state."""
    q = np.asarray(q, dtype=float)
    bonus = c * math.log(t) / visits
    w = np.full(q.shape, bonus)
    w[int(np.argmax(q))] += 1.0 - c
    w = np.maximum(w, 0.0)
    total = w.sum()
    if total <= 0:
        log.warning("all UCB weights are zero; falling back to uniform selection")
        return np.full(q.shape, 1.0 / q.size)
    return w / total


def ucb_select(q, counts: UcbCounts, key: int, rng: np.random.Generator) -> Action:
    """Sample an action and advance the visit count for ``key`` and the step counter."""
    counts.visits[key] += 1
    w = ucb_weights(q, counts.c, counts.t, counts.visits[key])
    counts.t += 1
    return Action(int(rng.choice(len(w), p=w)))


class ReplayMemory:
    """FIFO ring buffer of transitions."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list = [None] * capacity
        self._next = 0          # total insertions so far; slot = id % capacity

    def __len__(self) -> int:
        return min(self._next, self.capacity)

    def store(self, transition: Transition) -> int:
        tid = self._next
        self._items[tid % self.capacity] = transition
        self._next += 1
        return tid

    def items(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = max(0, self._next - self.capacity)
        return [self._items[i % self.capacity] for i in range(start, self._next)]

    def sample(self, batch: int, rng: np.random.Generator) -> list[Transition]:
        if len(self) < batch:
            raise ValueError(f"memory holds {len(self)} transitions, need {batch}")
        idx = rng.integers(len(self), size=batch)
        return [self._items[i] for i in idx]


def store(memory: ReplayMemory, transition: Transition) -> int:
    return memory.store(transition)


class PrioritizedReplayMemory(ReplayMemory):
    """Proportional prioritized replay.

    Indices handed out by :meth:`sample` are insertion ids, so updates aimed
    at items that have since been evicted are detected and skipped.
    """

    def __init__(self, capacity: int = 10_000, alpha: float = 0.6, beta: float = 0.4,
                 eps: float = 0.01, prepop_capacity: int = 2_000):
        super().__init__(capacity)
        if alpha < 0 or beta < 0 or eps <= 0:
            raise ValueError("alpha, beta must be >= 0 and eps > 0")
        self.alpha = alpha
        self.beta = beta
        self.eps = eps
        self.prepop_capacity = prepop_capacity
        self._prio = np.zeros(capacity)
        self._max_prio = 1.0
        self.stale_updates = 0

    def store(self, transition: Transition, priority: float | None = None) -> int:
        p = self._max_prio if priority is None else max(float(priority), self.eps)
        tid = super().store(transition)
        self._prio[tid % self.capacity] = p
        self._max_prio = max(self._max_prio, p)
        return tid

    def priorities(self) -> np.ndarray:
        """Priorities in slot order for the occupied slots."""
        return self._prio[: len(self)].copy()

    def probabilities(self) -> np.ndarray:
        scaled = self._prio[: len(self)] ** self.alpha
        return scaled / scaled.sum()

    def count(self, source: str) -> int:
        return sum(1 for t in self._items[: len(self)] if t.source == source)

    def _slot_to_id(self, slot: np.ndarray) -> np.ndarray:
        base = self._next - self._next % self.capacity
        ids = base + slot
        return np.where(ids >= self._next, ids - self.capacity, ids)

    def sample(self, batch: int, rng: np.random.Generator):
        """Draw ``batch`` items with P(i) proportional to p_i^alpha.

        Returns (transitions, insertion ids, importance weights normalized by
        their maximum).
        """
        size = len(self)
        if size < batch or batch < 1:
            raise ValueError(f"memory holds {size} transitions, need {batch}")
        probs = self.probabilities()
        slots = rng.choice(size, size=batch, p=probs)
        weights = (size * probs[slots]) ** (-self.beta)
        weights = weights / weights.max()
        return [self._items[s] for s in slots], self._slot_to_id(slots), weights

    def update_priorities(self, ids, td_errors) -> None:
        for tid, err in zip(np.asarray(ids), np.asarray(td_errors, dtype=float)):
            if tid < self._next - self.capacity or tid >= self._next:
                self.stale_updates += 1
                continue
            p = abs(float(err)) + self.eps
            self._prio[tid % self.capacity] = p
            self._max_prio = max(self._max_prio, p)


def per_store(memory: PrioritizedReplayMemory, transition: Transition, priority: float | None = None) -> int:
    return memory.store(transition, priority)


def per_sample(memory: PrioritizedReplayMemory, batch: int, rng: np.random.Generator):
    return memory.sample(batch, rng)


def update_priorities(memory: PrioritizedReplayMemory, ids, td_errors) -> None:
    memory.update_priorities(ids, td_errors)


def prepopulate_dual_thrust(memory: PrioritizedReplayMemory, series: PriceSeries,
                            params: DualThrustParams = DualThrustParams(), window: int = 24,
                            commission: float = 0.002, reward_clip: float = 0.05) -> int:
    """Roll the Dual Thrust policy through the environment, storing each transition.

    Entries are tagged with the ``dual_thrust`` source and stored at maximal
    priority.  At most ``memory.prepop_capacity`` transitions are stored.
    """
    if len(series) < window + 2:
        raise ValueError(f"series too short: need at least {window + 2} bars")
    if window < params.lookback:
        raise ValueError("window must cover the Dual Thrust lookback")
    env = TradingEnv(series, window, commission, reward_clip)
    policy = DualThrustPolicy(params)
    state = env.reset()
    stored = 0
    done = False
    while not done and stored < memory.prepop_capacity:
        t = env.t
        action = policy(series, t, env.long)
        r, next_state, done, _ = env.step(action)
        memory.store(Transition(state, action, r, next_state, done, DUAL_THRUST))
        stored += 1
        state = next_state
    return stored


class GreedyQPolicy:
    """Argmax over network Q-values; evaluation mode, no exploration."""

    def __init__(self, params: NetworkParams, batch: int = 128):
        self.params = params
        self.warmup = params.config.window
        self._batch = batch
        self._cache: tuple[PriceSeries, np.ndarray] | None = None

    def _actions(self, series: PriceSeries) -> np.ndarray:
        if self._cache is None or self._cache[0] is not series:
            wins = all_windows(series, self.warmup)
            qs = [q_values(self.params, wins[i:i + self._batch]) for i in range(0, len(wins), self._batch)]
            self._cache = (series, np.argmax(np.concatenate(qs), axis=1))
        return self._cache[1]

    def __call__(self, series: PriceSeries, t: int, long: bool) -> Action:
        return Action(int(self._actions(series)[t - self.warmup]))
