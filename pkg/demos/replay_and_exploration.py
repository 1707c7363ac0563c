"""
Prioritized replay and UCB exploration
======================================

"""

import numpy as np

from qadqn.actions import Action
from qadqn.agent import (PrioritizedReplayMemory, Transition, UcbCounts, prepopulate_dual_thrust,
                         ucb_select, ucb_weights)
from qadqn.data import gbm_series

rng = np.random.default_rng(4)
s = np.zeros((2, 4))

# Sampling probability is proportional to priority ** alpha.
memory = PrioritizedReplayMemory(capacity=100, alpha=1.0, beta=0.4)
for p in (1.0, 2.0, 3.0, 4.0):
    memory.store(Transition(s, Action.SIT, 0.0, s, False), p)
print("probabilities", memory.probabilities())

# A batch comes with insertion ids (for priority updates) and importance weights.
batch, ids, weights = memory.sample(4, rng)
print("ids", ids, "weights", np.round(weights, 3))
memory.update_priorities(ids, [0.5, 0.0, 2.0, 1.0])
print("updated priorities", memory.priorities())

# UCB adds c * ln(t) / N(s) to every Q-value; rarely visited states explore more.
q = np.array([0.1, 0.4, -0.2])
for visits in (1, 10, 100):
    print("N =", visits, np.round(ucb_weights(q, 0.5, 100, visits), 3))
counts = UcbCounts(0.5)
print("sampled actions", [ucb_select(q, counts, 0, rng).label for _ in range(8)])

# Before learning, the memory is seeded with Dual Thrust experience.
seeded = PrioritizedReplayMemory()
n = prepopulate_dual_thrust(seeded, gbm_series(100, 0.05, 0.3, 1 / 252, 200, seed=4))
print(n, "transitions from the Dual Thrust rollout")
