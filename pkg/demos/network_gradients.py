"""
The hybrid Q-network and its gradients
======================================

"""

import numpy as np

from qadqn.gradcheck import check_network, check_postnet
from qadqn.network import NetConfig, backward, forward, init_params, q_values

# LSTM over a 24-step window, dense pre-net, two attention heads, quantum post-net.
config = NetConfig()
params = init_params(config, seed=0)
print({g: sum(params[n].size for n in names) for g, names in params.groups().items()})

rng = np.random.default_rng(3)
windows = rng.normal(scale=0.01, size=(5, config.window, config.features))

# Three Q-values per window (sit, buy, sell), each a Pauli-Z expectation in [-1, 1].
print(np.round(q_values(params, windows), 5))

# Backpropagate an upstream gradient through every layer.
q, cache = forward(params, windows)
grads = backward(cache, np.ones_like(q))
for name, g in sorted(grads.items()):
    print(f"  {name:<14} |grad| {np.linalg.norm(g):.2e}")

# Finite-difference checks of the shift rule and of the whole Huber TD loss.
for report in (check_postnet(trials=5), check_network()):
    print("\n".join(report.lines()))
