"""
Quantum multihead self-attention
================================

"""

import numpy as np

from qadqn import autodiff as ad
from qadqn.attention import AttentionHeadParams, attention_matrix, head_output, multihead

rng = np.random.default_rng(2)

# Four positions of four features each, as produced by the classical pre-net.
x = rng.uniform(-1, 1, (4, 4))

# Each head reads queries and keys from one qubit and values from all four.
heads = [AttentionHeadParams.random(rng) for _ in range(2)]
out = multihead(x, heads)
print("multihead output", out.shape)

# Scores are negative squared distances between query and key scalars.
q, k = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
w = ad.softmax(attention_matrix(q, k) / 2.0, axis=-1)
print("attention rows sum to", np.round(w.sum(axis=1), 12))

# Equal queries and keys give uniform attention: every output row is the mean of V.
v = rng.uniform(-1, 1, (4, 4))
same = np.full(4, 0.3)
print("uniform case matches mean:", np.allclose(head_output(attention_matrix(same, same), v, 4), v.mean(axis=0)))
