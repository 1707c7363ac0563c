import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qadqn import autodiff as ad
from qadqn.attention import (AttentionHeadParams, attention_matrix, head_output, key_scalar, multihead, qmsa,
                             query_scalar, value_row)
from qadqn.quantum import entangling_circuit

from test_quantum import oracle_embed, oracle_unitary, oracle_z

SPEC = entangling_circuit(4, 2)


def zero_head():
    return AttentionHeadParams(np.zeros(8), np.zeros(8), np.zeros(8))


def born(x, theta, q):
    psi = oracle_unitary(SPEC, theta) @ oracle_embed(x)
    return oracle_z(psi, q, 4)


def test_key_examples():
    h = zero_head()
    assert key_scalar(np.zeros(4), h) == pytest.approx(1, abs=1e-15)
    assert key_scalar(np.array([math.pi, 0, 0, 0]), h) == pytest.approx(-1, abs=1e-15)
    assert query_scalar(np.zeros(4), h) == pytest.approx(1, abs=1e-15)
    assert np.allclose(value_row(np.zeros(4), h), 1, atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        key_scalar(np.zeros(3), zero_head())
    with pytest.raises(ValueError):
        AttentionHeadParams(np.zeros(7), np.zeros(8), np.zeros(8))


def test_query_equals_key_for_equal_angles(rng):
    th = rng.uniform(-3, 3, 8)
    h = AttentionHeadParams(th, th.copy(), rng.uniform(-3, 3, 8))
    for _ in range(5):
        x = rng.uniform(-3, 3, 4)
        assert query_scalar(x, h) == key_scalar(x, h)


def test_readouts_match_born_rule_oracle(rng):
    for _ in range(5):
        h = AttentionHeadParams.random(rng)
        x = rng.uniform(-3, 3, 4)
        assert key_scalar(x, h) == pytest.approx(born(x, h.theta_k, 0), abs=1e-13)
        assert query_scalar(x, h) == pytest.approx(born(x, h.theta_q, 0), abs=1e-13)
        assert np.allclose(value_row(x, h), [born(x, h.theta_v, q) for q in range(4)], atol=1e-13)
        assert np.all(np.abs(value_row(x, h)) <= 1 + 1e-12)


def test_attention_matrix_examples():
    assert np.array_equal(attention_matrix(np.array([1.0]), np.array([0.0])), [[-1.0]])
    A = attention_matrix(np.array([0.5, -0.5]), np.array([0.5, 0.0]))
    assert np.allclose(A, [[0, -0.25], [-1, -0.25]], atol=0)
    assert np.all(attention_matrix(np.full(3, 0.2), np.full(3, 0.2)) == 0)
    with pytest.raises(ValueError):
        attention_matrix(np.zeros(2), np.zeros(3))


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=6))
def test_attention_matrix_properties(q):
    q = np.array(q)
    A = attention_matrix(q, q)
    assert np.all(A <= 0)
    assert np.all(np.diag(A) == 0)
    assert np.array_equal(A, A.T)


def test_head_output_examples(rng):
    V = rng.uniform(-1, 1, (5, 4))
    out = head_output(np.zeros((5, 5)), V, 4)
    assert np.allclose(out, V.mean(axis=0), atol=1e-12)
    assert np.array_equal(head_output(np.zeros((1, 1)), V[:1], 4), V[:1])
    with pytest.raises(ValueError):
        head_output(np.zeros((4, 4)), V, 4)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_head_output_rows_convex_and_normalized(seed, seq):
    rng = np.random.Generator(np.random.PCG64(seed))
    Q, K = rng.uniform(-1, 1, seq), rng.uniform(-1, 1, seq)
    V = rng.uniform(-1, 1, (seq, 4))
    A = attention_matrix(Q, K)
    w = ad.softmax(A / 2.0, axis=-1)
    assert np.all(np.abs(w.sum(axis=-1) - 1) < 1e-9)
    assert np.all((w > 0) & (w <= 1))
    out = head_output(A, V, 4)
    assert np.all(out >= V.min(axis=0) - 1e-12) and np.all(out <= V.max(axis=0) + 1e-12)


def test_multihead_shapes_and_duplication(rng):
    h = AttentionHeadParams.random(rng)
    x = rng.uniform(-2, 2, (6, 4))
    one = multihead(x, [h])
    assert one.shape == (6, 4)
    K = np.array([key_scalar(r, h) for r in x])
    Q = np.array([query_scalar(r, h) for r in x])
    V = np.array([value_row(r, h) for r in x])
    assert np.allclose(one, head_output(attention_matrix(Q, K), V, 4), atol=1e-12)
    two = multihead(x, [h, h])
    assert two.shape == (6, 8)
    assert np.allclose(two[:, :4], one, atol=1e-14) and np.allclose(two[:, 4:], one, atol=1e-14)
    with pytest.raises(ValueError):
        multihead(x, [])


def test_head_gradients_match_finite_differences(rng):
    thetas = [rng.uniform(-np.pi, np.pi, 8) for _ in range(3)]
    x = rng.uniform(-2, 2, (5, 4))
    w = rng.normal(size=(5, 4))
    tape = ad.Tape()
    leaves = [tape.leaf(t) for t in thetas]
    grads = tape.backward(ad.sum_(ad.mul(qmsa(x, leaves, SPEC), w)))
    h = 1e-5
    for k, t in enumerate(thetas):
        for j in range(8):
            tp, tm = [a.copy() for a in thetas], [a.copy() for a in thetas]
            tp[k][j] += h
            tm[k][j] -= h
            fd = (np.sum(qmsa(x, tp, SPEC) * w) - np.sum(qmsa(x, tm, SPEC) * w)) / (2 * h)
            g = grads[leaves[k]][j]
            scale = max(abs(g), abs(fd))
            if scale > 1e-7:
                assert abs(g - fd) / scale < 1e-4
            else:
                assert abs(g - fd) < 1e-7
