"""
Training the agent
==================

A short run on a sinusoid. Twenty episodes take a few minutes; two are
shown here to keep the demo quick.
"""

import numpy as np

from qadqn.agent import GreedyQPolicy
from qadqn.backtest import run
from qadqn.data import sinusoid_series
from qadqn.network import NetConfig
from qadqn.strategies import RandomPolicy
from qadqn.training import TrainConfig, train

series = sinusoid_series(100.0, 10.0, 50, 150)
config = TrainConfig(episodes=2, seed=7, batch_size=16, target_update=50)


def progress(log):
    print(f"episode {log.episode}: reward {log.cum_reward:+.4f}  loss {log.mean_loss:.5f}  "
          f"explore {log.explore_rate:.2f}")


params, logs = train(series, config, NetConfig(), on_episode=progress)

# Greedy evaluation against seeded random baselines.
greedy = run(GreedyQPolicy(params), series)[0]
randoms = [run(RandomPolicy(k), series, start=24)[0].return_pct for k in range(5)]
print(f"greedy {greedy.return_pct:.2f}%  random mean {np.mean(randoms):.2f}%")
