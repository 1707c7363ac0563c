"""Minimal tape-based reverse-mode differentiation over float64 numpy arrays.

Every op accepts either :class:`Node` objects or plain arrays.  When at least
one argument is a node the result is recorded on that node's tape; with only
plain arrays the op just returns the forward value, so the same code path
serves gradient-free evaluation.

    tape = Tape()
    w = tape.leaf(np.ones(3))
    y = sum_(elu(w * 2.0))
    grads = tape.backward(y)      # {w: d y / d w}
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class TapeError(RuntimeError):
    pass


class Node:
    __slots__ = ("value", "tape", "parents", "vjp", "requires_grad", "index", "name")

    def __init__(self, value, tape, parents=(), vjp=None, requires_grad=True, name=None):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.name = name
        self.index = tape._push(self)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.value.shape})"

    __array_priority__ = 100

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return mul(self, 1.0 / np.asarray(other, dtype=float))
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __rmatmul__(self, other): return matmul(other, self)
    def __getitem__(self, idx): return getitem(self, idx)


class Tape:
    """Records nodes in creation order, which is a topological order."""

    def __init__(self):
        self._nodes: list[Node] = []
        self.consumed = False

    def _push(self, node: Node) -> int:
        if self.consumed:
            raise TapeError("tape already consumed by backward(); record a new forward pass")
        self._nodes.append(node)
        return len(self._nodes) - 1

    def __len__(self):
        return len(self._nodes)

    def leaf(self, value, name: str | None = None) -> Node:
        """A differentiable input."""
        return Node(np.array(value, dtype=float), self, name=name)

    def const(self, value) -> Node:
        return Node(np.asarray(value, dtype=float), self, requires_grad=False)

    def backward(self, output: Node, seed=None) -> dict[Node, np.ndarray]:
        """Gradients of ``output`` (weighted by ``seed``) for every leaf on the tape."""
        if self.consumed:
            raise TapeError("tape already consumed by backward()")
        if output.tape is not self:
            raise TapeError("output node belongs to a different tape")
        self.consumed = True
        if seed is None:
            seed = np.ones_like(output.value)
        seed = np.asarray(seed, dtype=float)
        if seed.shape != output.value.shape:
            raise ValueError(f"seed shape {seed.shape} != output shape {output.value.shape}")
        grads: dict[int, np.ndarray] = {output.index: seed}
        leaves: dict[Node, np.ndarray] = {}
        for node in reversed(self._nodes[: output.index + 1]):
            g = grads.pop(node.index, None)
            if node.vjp is None:
                if node.requires_grad:
                    leaves[node] = g if g is not None else np.zeros_like(node.value)
                continue
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not isinstance(parent, Node) or not parent.requires_grad:
                    continue
                prev = grads.get(parent.index)
                grads[parent.index] = pg if prev is None else prev + pg
        for node in self._nodes[output.index + 1:]:
            if node.vjp is None and node.requires_grad:
                leaves[node] = np.zeros_like(node.value)
        return leaves


def backward(tape: Tape, output: Node, seed=None) -> dict[Node, np.ndarray]:
    return tape.backward(output, seed)


def value(x):
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=float)


def _record(out, args: Sequence, vjp: Callable):
    """Wrap a forward value as a node if any argument lives on a tape."""
    tape = None
    needs = False
    for a in args:
        if isinstance(a, Node):
            tape = a.tape
            needs = needs or a.requires_grad
    if tape is None:
        return out
    return Node(out, tape, tuple(args), vjp if needs else None, requires_grad=needs)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------

def add(a, b):
    av, bv = value(a), value(b)
    return _record(av + bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value(a), value(b)
    return _record(av - bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = value(a), value(b)
    return _record(av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def neg(a):
    return _record(-value(a), (a,), lambda g: (-g,))


def square(a):
    av = value(a)
    return _record(av * av, (a,), lambda g: (2.0 * av * g,))


def matmul(a, b):
    """numpy matmul semantics, including batched leading dimensions."""
    av, bv = value(a), value(b)

    def vjp(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        a2 = av[None, :] if av.ndim == 1 else av
        b2 = bv[:, None] if bv.ndim == 1 else bv
        g2 = g
        if av.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if bv.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        ga = g2 @ np.swapaxes(b2, -1, -2)
        gb = np.swapaxes(a2, -1, -2) @ g2
        if av.ndim == 1:
            ga = ga[..., 0, :]
        if bv.ndim == 1:
            gb = gb[..., :, 0]
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _record(av @ bv, (a, b), vjp)


# -- nonlinearities -----------------------------------------------------------

def elu(x):
    """ELU with alpha = 1: x for x >= 0, exp(x) - 1 otherwise."""
    xv = value(x)
    ex = np.exp(np.minimum(xv, 0.0))
    out = np.where(xv >= 0, xv, ex - 1.0)
    return _record(out, (x,), lambda g: (g * np.where(xv >= 0, 1.0, ex),))


def sigmoid(x):
    xv = value(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * xv))
    return _record(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(value(x))
    return _record(out, (x,), lambda g: (g * (1.0 - out * out),))


def softmax(x, axis: int = -1):
    """Max-subtracted softmax along ``axis``."""
    xv = value(x)
    e = np.exp(xv - xv.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _record(out, (x,), vjp)


# -- shape ops ------------------------------------------------------------------

def reshape(x, shape):
    xv = value(x)
    return _record(xv.reshape(shape), (x,), lambda g: (g.reshape(xv.shape),))


def getitem(x, idx):
    xv = value(x)
    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(p is Ellipsis or p is None or isinstance(p, (int, slice)) for p in parts)

    def vjp(g):
        out = np.zeros_like(xv)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _record(xv[idx], (x,), vjp)


def concat(xs: Sequence, axis: int = -1):
    vals = [value(x) for x in xs]
    splits = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return _record(np.concatenate(vals, axis=axis), tuple(xs),
                   lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(xs: Sequence, axis: int = 0):
    vals = [value(x) for x in xs]
    n = len(vals)

    def vjp(g):
        return tuple(np.take(g, k, axis=axis) for k in range(n))

    return _record(np.stack(vals, axis=axis), tuple(xs), vjp)


def sum_(x, axis=None):
    xv = value(x)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, xv.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy(),)

    return _record(np.sum(xv, axis=axis), (x,), vjp)


def custom(out, inputs: Iterable, vjp: Callable):
    """Record an opaque op whose backward is supplied by the caller.

    ``vjp(g)`` must return one gradient (or None) per input.
    """
    return _record(np.asarray(out, dtype=float), tuple(inputs), vjp)


# -- layers ---------------------------------------------------------------------

def linear(x, w, b):
    return add(matmul(x, w), b)


def lstm_cell(x, h, c, w_x, w_h, b):
    """One LSTM step with gate order (input, forget, candidate, output).

    ``w_x`` is (f, 4H), ``w_h`` is (H, 4H), ``b`` is (4H,).  Returns (h', c').
    """
    hidden = value(h).shape[-1]
    if value(w_x).shape[-1] != 4 * hidden or value(w_h).shape != (hidden, 4 * hidden):
        raise ValueError("LSTM weight shapes do not match hidden size")
    if value(x).shape[-1] != value(w_x).shape[0]:
        raise ValueError("LSTM input width does not match w_x")
    z = add(add(matmul(x, w_x), matmul(h, w_h)), b)
    return lstm_gates(z, c)


def lstm_gates(z, c):
    """Gate nonlinearities and state update given pre-activations z (..., 4H)."""
    zv, cv = value(z), value(c)
    H = zv.shape[-1] // 4
    act = np.empty_like(zv)
    act[..., :2 * H] = 0.5 * (1.0 + np.tanh(0.5 * zv[..., :2 * H]))
    act[..., 2 * H:3 * H] = np.tanh(zv[..., 2 * H:3 * H])
    act[..., 3 * H:] = 0.5 * (1.0 + np.tanh(0.5 * zv[..., 3 * H:]))
    i, f, gg, o = act[..., :H], act[..., H:2 * H], act[..., 2 * H:3 * H], act[..., 3 * H:]
    c_new = f * cv + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    both = np.concatenate([h_new, c_new], axis=-1)

    def vjp(g):
        gh, gc = g[..., :H], g[..., H:]
        gc = gc + gh * o * (1.0 - tc * tc)
        dact = np.empty_like(zv)
        dact[..., :H] = gc * gg * i * (1.0 - i)
        dact[..., H:2 * H] = gc * cv * f * (1.0 - f)
        dact[..., 2 * H:3 * H] = gc * i * (1.0 - gg * gg)
        dact[..., 3 * H:] = gh * tc * o * (1.0 - o)
        return dact, _unbroadcast(gc * f, cv.shape)

    out = _record(both, (z, c), vjp)
    return getitem(out, (Ellipsis, slice(0, H))), getitem(out, (Ellipsis, slice(H, 2 * H)))
