"""Quantum multihead self-attention.

Keys and queries are single-qubit <Z_0> readouts of variational circuits
applied to each angle-embedded input row; values are the <Z_j> readouts of
every qubit.  Scores use the negative squared key/query distance
``A_ij = -(Q_i - K_j)^2`` and the head output is ``softmax(A / sqrt(dh)) V``.

All helpers accept numpy arrays or autodiff nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .quantum import CircuitSpec, QuantumLayer, angle_embed, entangling_circuit, expect_z, run_circuit


@dataclass
class AttentionHeadParams:
    theta_k: np.ndarray
    theta_q: np.ndarray
    theta_v: np.ndarray
    spec: CircuitSpec = field(default_factory=entangling_circuit)

    def __post_init__(self):
        for name in ("theta_k", "theta_q", "theta_v"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if arr.size != self.spec.num_params:
                raise ValueError(f"{name} needs {self.spec.num_params} angles, got {arr.size}")
            setattr(self, name, arr)

    @classmethod
    def random(cls, rng: np.random.Generator, spec: CircuitSpec | None = None) -> "AttentionHeadParams":
        spec = spec or entangling_circuit()
        draw = lambda: rng.uniform(-np.pi, np.pi, spec.num_params)
        return cls(draw(), draw(), draw(), spec)


def _readout(x_row, theta, spec: CircuitSpec, qubits: Sequence[int]) -> np.ndarray:
    x_row = np.asarray(x_row, dtype=float)
    if x_row.shape != (spec.n,):
        raise ValueError(f"expected a row of {spec.n} values, got shape {x_row.shape}")
    state = run_circuit(spec, theta, angle_embed(x_row))
    return np.array([expect_z(state, q) for q in qubits])


def key_scalar(x_row, head: AttentionHeadParams) -> float:
    return float(_readout(x_row, head.theta_k, head.spec, (0,))[0])


def query_scalar(x_row, head: AttentionHeadParams) -> float:
    return float(_readout(x_row, head.theta_q, head.spec, (0,))[0])


def value_row(x_row, head: AttentionHeadParams) -> np.ndarray:
    return _readout(x_row, head.theta_v, head.spec, range(head.spec.n))


def attention_matrix(Q, K):
    """A[..., i, j] = -(Q_i - K_j)^2."""
    qv, kv = ad.value(Q), ad.value(K)
    if qv.shape != kv.shape:
        raise ValueError(f"query/key length mismatch: {qv.shape} vs {kv.shape}")
    diff = ad.sub(ad.reshape(Q, qv.shape + (1,)), ad.reshape(K, kv.shape[:-1] + (1, kv.shape[-1])))
    return ad.neg(ad.square(diff))


def head_output(A, V, dh: int):
    av, vv = ad.value(A), ad.value(V)
    seq = vv.shape[-2]
    if av.shape[-2:] != (seq, seq) or vv.shape[-1] != dh:
        raise ValueError(f"shape mismatch: A {av.shape}, V {vv.shape}, dh {dh}")
    weights = ad.softmax(ad.mul(A, 1.0 / np.sqrt(dh)), axis=-1)
    return ad.matmul(weights, V)


def head_layer(spec: CircuitSpec, heads: int) -> QuantumLayer:
    """One shared-input layer producing (K, Q, V_0..V_{n-1}) for every head."""
    n = spec.n
    readouts = []
    for _ in range(heads):
        readouts += [(0,), (0,), tuple(range(n))]
    return QuantumLayer(spec, tuple(readouts))


def qmsa(x, thetas: Sequence, spec: CircuitSpec):
    """Multihead attention over rows of ``x`` (..., seq, dh).

    ``thetas`` is a flat list ``[k0, q0, v0, k1, q1, v1, ...]``.  Returns
    (..., seq, H * dh).
    """
    n = spec.n
    heads = len(thetas) // 3
    if heads < 1 or len(thetas) != 3 * heads:
        raise ValueError("need three parameter vectors per head")
    xv = ad.value(x)
    if xv.shape[-1] != n:
        raise ValueError(f"attention input width {xv.shape[-1]} != qubit count {n}")
    layer = head_layer(spec, heads)
    feats = layer(x, list(thetas))            # (..., seq, heads * (n + 2))
    per = n + 2
    outs = []
    for h in range(heads):
        base = h * per
        K = ad.getitem(feats, (Ellipsis, base))
        Q = ad.getitem(feats, (Ellipsis, base + 1))
        V = ad.getitem(feats, (Ellipsis, slice(base + 2, base + per)))
        outs.append(head_output(attention_matrix(Q, K), V, n))
    return outs[0] if heads == 1 else ad.concat(outs, axis=-1)


def multihead(x, heads: Sequence[AttentionHeadParams]) -> np.ndarray:
    """Concatenated head outputs for a (seq, dh) input; shape (seq, H * dh)."""
    if not heads:
        raise ValueError("at least one head is required")
    spec = heads[0].spec
    thetas = []
    for h in heads:
        thetas += [h.theta_k, h.theta_q, h.theta_v]
    return qmsa(np.asarray(x, dtype=float), thetas, spec)
