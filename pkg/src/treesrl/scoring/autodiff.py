"""Minimal reverse-mode autodiff over numpy float64 arrays.

Just the ops the scorer heads need: elementwise arithmetic with
broadcasting, matmul, tanh, row gather, concat, log-softmax, and the two
multilinear contractions. Backward functions close over forward values;
calling backward() on a scalar accumulates into leaf .grad buffers, which
persist across calls until the owner clears them.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "needs_grad")

    def __init__(self, data, needs_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.needs_grad = needs_grad or any(p.needs_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g):
        if not self.needs_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None):
        topo, seen = [], set()

        def visit(node):
            if id(node) in seen or not node.needs_grad:
                return
            seen.add(id(node))
            for p in node.parents:
                visit(p)
            topo.append(node)

        visit(self)
        self.accumulate(np.ones_like(self.data) if grad is None else grad)
        for node in reversed(topo):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)
            if node.parents:  # free intermediate buffers, keep leaf grads
                node.grad = None


def param(data) -> Tensor:
    return Tensor(data, needs_grad=True)


def const(data) -> Tensor:
    return Tensor(data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    out.backward_fn = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    out.backward_fn = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    out.backward_fn = backward
    return out


def transpose(a) -> Tensor:
    out = Tensor(a.data.T, parents=(a,))
    out.backward_fn = lambda g: a.accumulate(g.T)
    return out


def tanh(a) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))
    out.backward_fn = lambda g: a.accumulate(g * (1.0 - y * y))
    return out


def gather_rows(a, idx) -> Tensor:
    idx = np.asarray(idx)
    out = Tensor(a.data[idx], parents=(a,))

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        a.accumulate(buf)

    out.backward_fn = backward
    return out


def concat(parts, axis=1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis),
                 parents=tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]

    def backward(g):
        offset = 0
        for p, s in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + s)
            p.accumulate(g[tuple(sl)])
            offset += s

    out.backward_fn = backward
    return out


def sum_all(a) -> Tensor:
    out = Tensor(a.data.sum(), parents=(a,))
    out.backward_fn = lambda g: a.accumulate(np.broadcast_to(g, a.data.shape))
    return out


def inject(a, d) -> Tensor:
    """Zero-valued scalar whose gradient with respect to ``a`` is ``d``.

    Entry point for an externally computed vector-Jacobian product, e.g.
    table-cell gradients from the chart layer. Avoids forming a*d, which
    would produce NaN where masked -inf cells meet zero weights.
    """
    d = np.asarray(d, dtype=np.float64)
    out = Tensor(np.float64(0.0), parents=(a,))
    out.backward_fn = lambda g: a.accumulate(g * d)
    return out


def log_softmax(a) -> Tensor:
    """Log-softmax over the last axis; -inf logits mean excluded classes
    (every row must keep at least one finite entry)."""
    x = a.data
    m = x.max(axis=-1, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    z = np.exp(x - safe).sum(axis=-1, keepdims=True)
    y = x - (safe + np.log(z))
    out = Tensor(y, parents=(a,))

    def backward(g):
        a.accumulate(g - np.exp(y) * g.sum(axis=-1, keepdims=True))

    out.backward_fn = backward
    return out


def trilinear(rh, rs, rm, w) -> Tensor:
    """out[h, s, m] = sum_abc rh[h,a] w[a,b,c] rs[s,b] rm[m,c]."""
    out_data = np.einsum("ha,abc,sb,mc->hsm", rh.data, w.data, rs.data,
                         rm.data, optimize=True)
    out = Tensor(out_data, parents=(rh, rs, rm, w))

    def backward(g):
        rh.accumulate(np.einsum("hsm,abc,sb,mc->ha", g, w.data, rs.data,
                                rm.data, optimize=True))
        rs.accumulate(np.einsum("hsm,abc,ha,mc->sb", g, w.data, rh.data,
                                rm.data, optimize=True))
        rm.accumulate(np.einsum("hsm,abc,ha,sb->mc", g, w.data, rh.data,
                                rs.data, optimize=True))
        w.accumulate(np.einsum("hsm,ha,sb,mc->abc", g, rh.data, rs.data,
                               rm.data, optimize=True))

    out.backward_fn = backward
    return out


def label_bilinear(rh, rm, w) -> Tensor:
    """out[h, m, l] = sum_ab rh[h,a] w[l,a,b] rm[m,b]."""
    out_data = np.einsum("ha,lab,mb->hml", rh.data, w.data, rm.data,
                         optimize=True)
    out = Tensor(out_data, parents=(rh, rm, w))

    def backward(g):
        rh.accumulate(np.einsum("hml,lab,mb->ha", g, w.data, rm.data,
                                optimize=True))
        rm.accumulate(np.einsum("hml,lab,ha->mb", g, w.data, rh.data,
                                optimize=True))
        w.accumulate(np.einsum("hml,ha,mb->lab", g, rh.data, rm.data,
                               optimize=True))

    out.backward_fn = backward
    return out
