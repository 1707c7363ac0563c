import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qadqn import autodiff as ad


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def tape_grad(build, *values):
    tape = ad.Tape()
    leaves = [tape.leaf(v) for v in values]
    out = build(*leaves)
    grads = tape.backward(out)
    return [grads[l] for l in leaves]


def rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


def test_elu_examples():
    assert ad.elu(np.array(0.0)) == 0
    assert ad.elu(np.array(2.0)) == 2
    assert ad.elu(np.array(-1.0)) == pytest.approx(math.exp(-1) - 1, abs=1e-15)
    assert ad.elu(np.array(-1.0)) == pytest.approx(-0.632121, abs=1e-6)


def test_softmax_examples():
    assert np.allclose(ad.softmax(np.zeros(3)), 1 / 3, atol=1e-15)
    assert np.allclose(ad.softmax(np.array([0.0, math.log(3)])), [0.25, 0.75], atol=1e-15)


@given(arrays(float, st.integers(1, 8), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_sums_to_one_and_shift_invariant(v, c):
    p = ad.softmax(v)
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(p > 0) or v.max() - v.min() > 700
    assert np.allclose(ad.softmax(v + c), p, atol=1e-12)


def test_identity_gradient():
    tape = ad.Tape()
    x = tape.leaf(np.array(3.0))
    assert tape.backward(x)[x] == 1.0


def test_elu_gradient_at_minus_one():
    (g,) = tape_grad(ad.elu, np.array(-1.0))
    assert g == pytest.approx(math.exp(-1), abs=1e-15)


def lstm_oracle(x, h, c, wx, wh, b):
    sig = lambda z: 1 / (1 + np.exp(-z))
    H = h.shape[-1]
    z = x @ wx + h @ wh + b
    i, f, g, o = (z[..., k * H:(k + 1) * H] for k in range(4))
    c2 = sig(f) * c + sig(i) * np.tanh(g)
    return sig(o) * np.tanh(c2), c2


def test_lstm_zero_params():
    H, f = 64, 4
    h, c = ad.lstm_cell(np.ones(f), np.zeros(H), np.zeros(H), np.zeros((f, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H))
    assert np.all(ad.value(h) == 0) and np.all(ad.value(c) == 0)


def test_lstm_zero_input_zero_state():
    rng = np.random.default_rng(0)
    H, f = 8, 4
    h, _ = ad.lstm_cell(np.zeros(f), np.zeros(H), np.zeros(H), rng.normal(size=(f, 4 * H)),
                        rng.normal(size=(H, 4 * H)), np.zeros(4 * H))
    assert np.all(ad.value(h) == 0)


def test_lstm_matches_oracle(rng):
    H, f = 6, 4
    args = (rng.normal(size=(3, f)), rng.normal(size=(3, H)), rng.normal(size=(3, H)),
            rng.normal(size=(f, 4 * H)), rng.normal(size=(H, 4 * H)), rng.normal(size=4 * H))
    h, c = ad.lstm_cell(*args)
    h2, c2 = lstm_oracle(*args)
    assert np.allclose(ad.value(h), h2, atol=1e-14)
    assert np.allclose(ad.value(c), c2, atol=1e-14)


def test_lstm_shape_mismatch():
    with pytest.raises(ValueError):
        ad.lstm_cell(np.zeros(3), np.zeros(4), np.zeros(4), np.zeros((4, 16)), np.zeros((4, 16)), np.zeros(16))


OPS = {
    "add": (lambda a, b: ad.sum_(ad.mul(ad.add(a, b), ad.add(a, b))), 2),
    "sub": (lambda a, b: ad.sum_(ad.square(ad.sub(a, b))), 2),
    "mul": (lambda a, b: ad.sum_(ad.mul(a, b)), 2),
    "neg": (lambda a: ad.sum_(ad.mul(ad.neg(a), a)), 1),
    "square": (lambda a: ad.sum_(ad.square(a)), 1),
    "elu": (lambda a: ad.sum_(ad.mul(ad.elu(a), a)), 1),
    "sigmoid": (lambda a: ad.sum_(ad.mul(ad.sigmoid(a), a)), 1),
    "tanh": (lambda a: ad.sum_(ad.mul(ad.tanh(a), a)), 1),
    "softmax": (lambda a: ad.sum_(ad.mul(ad.softmax(a, axis=-1), np.arange(12.0).reshape(3, 4))), 1),
    "matmul": (lambda a, b: ad.sum_(ad.square(ad.matmul(a, ad.reshape(b, (4, 3))))), 2),
    "getitem": (lambda a: ad.sum_(ad.square(ad.getitem(a, (slice(None), 1)))), 1),
    "concat": (lambda a, b: ad.sum_(ad.square(ad.concat([a, b], axis=0))), 2),
    "stack": (lambda a, b: ad.sum_(ad.mul(ad.stack([a, b], axis=1), np.arange(24.0).reshape(3, 2, 4))), 2),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_differences(name):
    build, arity = OPS[name]
    rng = np.random.Generator(np.random.PCG64(hash(name) % 2**32))
    for _ in range(20):
        vals = [rng.normal(size=(3, 4)) for _ in range(arity)]
        grads = tape_grad(build, *vals)
        for k in range(arity):
            def f(v, k=k):
                args = list(vals)
                args[k] = v
                return float(ad.value(build(*args)))
            assert rel(grads[k], numeric_grad(f, vals[k])) < 1e-5, name


def test_lstm_gradient_matches_finite_differences(rng):
    H, f = 5, 4
    vals = [rng.normal(size=(2, f)), rng.normal(size=(2, H)), rng.normal(size=(2, H)),
            rng.normal(size=(f, 4 * H)), rng.normal(size=(H, 4 * H)), rng.normal(size=4 * H)]
    w = rng.normal(size=(2, H))

    def build(*a):
        h, c = ad.lstm_cell(*a)
        return ad.sum_(ad.add(ad.mul(h, w), ad.square(c)))

    grads = tape_grad(build, *vals)
    for k in range(len(vals)):
        def f(v, k=k):
            args = list(vals)
            args[k] = v
            return float(ad.value(build(*args)))
        assert rel(grads[k], numeric_grad(f, vals[k])) < 1e-5


def test_composed_network_gradient(rng):
    x = rng.normal(size=(5, 4))
    w1, b1, w2 = rng.normal(size=(4, 6)), rng.normal(size=6), rng.normal(size=(6, 3))

    def build(w1, b1, w2):
        z = ad.elu(ad.linear(x, w1, b1))
        return ad.sum_(ad.mul(ad.softmax(ad.matmul(z, w2)), np.arange(15.0).reshape(5, 3)))

    grads = tape_grad(build, w1, b1, w2)
    for k, v in enumerate((w1, b1, w2)):
        def f(u, k=k):
            args = [w1, b1, w2]
            args[k] = u
            return float(ad.value(build(*args)))
        assert rel(grads[k], numeric_grad(f, v)) < 1e-5


def test_tape_reuse_raises():
    tape = ad.Tape()
    x = tape.leaf(np.array(2.0))
    y = ad.square(x)
    tape.backward(y)
    with pytest.raises(ad.TapeError):
        tape.backward(y)
    with pytest.raises(ad.TapeError):
        ad.square(x)


def test_backward_deterministic(rng):
    x = rng.normal(size=(4, 4))
    build = lambda a: ad.sum_(ad.tanh(ad.matmul(a, a)))
    g1, = tape_grad(build, x)
    g2, = tape_grad(build, x)
    assert np.array_equal(g1, g2)


def test_unreached_leaf_gets_zero():
    tape = ad.Tape()
    x, y = tape.leaf(np.ones(3)), tape.leaf(np.ones(2))
    grads = tape.backward(ad.sum_(x))
    assert np.all(grads[y] == 0)


def test_broadcast_add_gradient():
    (ga, gb) = tape_grad(lambda a, b: ad.sum_(ad.add(a, b)), np.zeros((3, 4)), np.zeros(4))
    assert np.all(gb == 3) and gb.shape == (4,)
