"""A small reverse-mode differentiation engine over numpy arrays.

Operations applied while a :class:`Tape` is active are appended to it
together with a closure that maps the output gradient onto the inputs.
``Tape.backward`` walks the recording in reverse. Outside a tape every
primitive just computes its forward value, which is what inference and
finite-difference probing use.

    w = Tensor(np.ones((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = mean(matmul(x, w))
    tape.backward(loss)
    w.grad
"""

import threading

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ShapeError

NORM_EPS = 1e-12

_state = threading.local()


def _active():
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """An array plus an optional gradient slot and its tape provenance."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, value, requires_grad=False, name=None):
        self.value = np.asarray(value)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    shape = property(lambda self: self.value.shape)
    dtype = property(lambda self: self.value.dtype)
    T = property(lambda self: transpose(self))

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.value

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return scale(self, 1.0 / c)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of primitive applications.

    Inputs of every recorded node precede it, so a reverse pass over the
    list is a valid topological order. A tape can be back-propagated once;
    call :meth:`reset` to reuse it.
    """

    def __init__(self, check_finite=True):
        self.nodes = []
        self.check_finite = check_finite
        self._done = False

    def __enter__(self):
        if not hasattr(_state, "stack"):
            _state.stack = []
        _state.stack.append(self)
        return self

    def __exit__(self, *exc):
        _state.stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def reset(self):
        self.nodes = []
        self._done = False

    def backward(self, loss):
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if self._done:
            raise RuntimeError("backward already ran on this tape; call reset() first")
        if not isinstance(loss, Tensor) or loss.value.size != 1:
            raise ShapeError("backward needs a scalar Tensor loss")
        self._done = True
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            g = node.grad
            if g is None:
                continue
            grads = node._backward(g)
            for parent, pg in zip(node._parents, grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.value.shape:
                    pg = _unbroadcast(pg, parent.value.shape)
                if parent.grad is None:
                    parent.grad = np.array(pg, dtype=parent.value.dtype, copy=True)
                else:
                    parent.grad += pg
            if node._parents:
                # intermediate gradients are no longer needed
                node.grad = None
        loss.grad = None


def backward(tape, loss):
    tape.backward(loss)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _record(value, parents, backward_fn):
    """Wrap a forward result and, when a tape is recording, register it."""
    out = Tensor(value)
    tape = _active()
    if tape is None or not any(p.requires_grad for p in parents):
        return out
    if tape.check_finite and not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite value produced by {backward_fn.__qualname__.split('.')[0]}")
    out.requires_grad = True
    out._parents = parents
    out._backward = backward_fn
    tape.nodes.append(out)
    return out


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# ---------------------------------------------------------------- linear


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def matmul_bw(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = av.T @ g if b.requires_grad else None
        return ga, gb

    return _record(av @ bv, (a, b), matmul_bw)


def transpose(a):
    a = as_tensor(a)
    return _record(a.value.T, (a,), lambda g: (g.T,))


def add(a, b):
    """Elementwise sum; a bias row (1, c) or (c,) broadcasts over rows."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _record(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _record(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    av, bv = a.value, b.value
    return _record(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a, c):
    a = as_tensor(a)
    c = float(c)
    return _record(a.value * a.value.dtype.type(c), (a,), lambda g: (g * c,))


def sum_all(a):
    a = as_tensor(a)
    shape = a.shape
    return _record(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, shape),))


def mean(a):
    a = as_tensor(a)
    shape, n = a.shape, a.value.size
    return _record(a.value.mean(), (a,), lambda g: (np.broadcast_to(g / n, shape),))


def concat(tensors, axis=1):
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def concat_bw(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _record(np.concatenate([t.value for t in ts], axis=axis), tuple(ts), concat_bw)


# ---------------------------------------------------------------- indexing


def gather_rows(a, idx):
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.shape

    def gather_rows_bw(g):
        if g.ndim == 1:
            return (np.bincount(idx, weights=g, minlength=shape[0]).astype(g.dtype),)
        # scatter-add as a sparse product: fixed summation order, far faster than add.at
        scatter = sp.csr_matrix((np.ones(idx.size, g.dtype), (idx, np.arange(idx.size))),
                                shape=(shape[0], idx.size))
        return (np.asarray(scatter @ g.reshape(idx.size, -1)).reshape(shape),)

    return _record(a.value[idx], (a,), gather_rows_bw)


def gather_elements(a, cols):
    """out[i, t] = a[i, cols[i, t]] for a 2-d ``a``."""
    a = as_tensor(a)
    cols = np.asarray(cols, dtype=np.int64)
    if a.value.ndim != 2 or cols.ndim != 2 or cols.shape[0] != a.shape[0]:
        raise ShapeError(f"gather_elements: {a.shape} with index {cols.shape}")
    shape = a.shape
    rows = np.broadcast_to(np.arange(shape[0])[:, None], cols.shape)

    def gather_elements_bw(g):
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, (rows, cols), g)
        return (out,)

    return _record(np.take_along_axis(a.value, cols, axis=1), (a,), gather_elements_bw)


# ---------------------------------------------------------------- sparse


def spmm(op, m):
    """Constant sparse operator times a dense matrix."""
    m = as_tensor(m)
    if op.shape[1] != m.shape[0]:
        raise ShapeError(f"spmm: operator {op.shape} with {m.shape}")
    dtype = m.value.dtype
    op = op.astype(dtype)
    op_t = op.T.tocsr()
    op_t.sort_indices()
    return _record(np.asarray(op @ m.value), (m,), lambda g: (np.asarray(op_t @ g),))


def incidence_aggregate(m, h, direction):
    """Mean aggregation across the incidence structure of ``h``.

    ``direction="node_to_edge"`` computes D_E^-1 H^T M (hyperedge rows are
    means of member rows); ``"edge_to_node"`` computes D_V^-1 H W M. Rows
    with zero degree come out as zeros and pass no gradient back.
    """
    m = as_tensor(m)
    if direction == "node_to_edge":
        op, deg = h.node_to_edge, h.degrees.hyperedge_degrees
    elif direction == "edge_to_node":
        op, deg = h.edge_to_node, h.degrees.node_degrees
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if op.shape[1] != m.shape[0]:
        raise ShapeError(f"incidence_aggregate: {m.shape[0]} rows for {op.shape[1]} sources")
    dtype = m.value.dtype
    op = op.astype(dtype)
    op_t = op.T.tocsr()
    op_t.sort_indices()
    deg = deg.astype(dtype)
    live = deg > 0
    safe = np.where(live, deg, 1)[:, None]
    mask = live[:, None]

    out = np.where(mask, np.asarray(op @ m.value) / safe, 0).astype(dtype, copy=False)

    def incidence_aggregate_bw(g):
        return (np.asarray(op_t @ np.where(mask, g / safe, 0).astype(dtype, copy=False)),)

    return _record(out, (m,), incidence_aggregate_bw)


# ---------------------------------------------------------------- pointwise


def prelu(x, slope):
    """max(0, x) + slope * min(0, x) with a learnable scalar slope.

    At exactly x == 0 the derivative is taken from the negative side.
    """
    x, slope = as_tensor(x), as_tensor(slope)
    xv, a = x.value, slope.value
    pos = xv > 0
    out = np.where(pos, xv, a * xv)

    def prelu_bw(g):
        gx = np.where(pos, g, a * g)
        ga = np.sum(np.where(pos, 0, g * xv)).reshape(a.shape)
        return gx, ga

    return _record(out, (x, slope), prelu_bw)


def elu(x, alpha=1.0):
    x = as_tensor(x)
    xv = x.value
    pos = xv > 0
    neg_part = alpha * np.expm1(np.minimum(xv, 0))
    out = np.where(pos, xv, neg_part)
    return _record(out, (x,), lambda g: (np.where(pos, g, g * (neg_part + alpha)),))


def sigmoid(x):
    x = as_tensor(x)
    xv = x.value
    e = np.exp(-np.abs(xv))
    out = np.where(xv >= 0, 1 / (1 + e), e / (1 + e)).astype(xv.dtype, copy=False)
    return _record(out, (x,), lambda g: (g * out * (1 - out),))


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.value)
    return _record(out, (x,), lambda g: (g * out,))


def log(x):
    x = as_tensor(x)
    xv = x.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(xv)
    return _record(out, (x,), lambda g: (g / xv,))


# ---------------------------------------------------------------- rows


def row_normalize(x, eps=NORM_EPS):
    """Scale each row to unit L2 norm; norms below ``eps`` are clamped."""
    x = as_tensor(x)
    xv = x.value
    norm = np.sqrt(np.sum(xv * xv, axis=1, keepdims=True))
    clamped = norm < eps
    denom = np.maximum(norm, eps)
    out = xv / denom

    def row_normalize_bw(g):
        proj = np.sum(g * out, axis=1, keepdims=True)
        gx = np.where(clamped, g / denom, (g - out * proj) / denom)
        return (gx,)

    return _record(out, (x,), row_normalize_bw)


def row_dot(a, b):
    """Per-row inner products of two equal-shape matrices, shape (n,)."""
    a, b = as_tensor(a), as_tensor(b)
    _check_same(a, b, "row_dot")
    av, bv = a.value, b.value
    return _record(np.sum(av * bv, axis=1), (a, b),
                   lambda g: (g[:, None] * bv, g[:, None] * av))


def bilinear(z, s, y):
    """Row-wise z_r^T S y_r for row-paired matrices ``z`` and ``y``."""
    return row_dot(matmul(z, s), y)


def logsumexp(x, axis=1):
    """Stable log-sum-exp along ``axis`` (max subtracted before exp)."""
    x = as_tensor(x)
    xv = x.value
    mx = np.max(xv, axis=axis, keepdims=True)
    e = np.exp(xv - mx)
    s = np.sum(e, axis=axis, keepdims=True)
    out = np.squeeze(mx + np.log(s), axis=axis)

    def logsumexp_bw(g):
        return (np.expand_dims(g, axis) * (e / s),)

    return _record(out, (x,), logsumexp_bw)


# ---------------------------------------------------------------- checking


def grad_check(f, params, eps=1e-5, tol=1e-4, kink_tol=1e-2):
    """Compare tape gradients against central finite differences.

    ``f`` builds and returns a scalar Tensor from ``params`` (a dict of name
    to Tensor); it must be deterministic. For each parameter the error is
    max |analytic - numeric| divided by the larger of the two gradients'
    max magnitudes. Entries whose one-sided difference quotients disagree
    by more than ``kink_tol`` (relative) sit on a non-differentiable point
    such as a PReLU input at 0 and are left out.

    Returns a dict ``{"passed": bool, "params": {name: {...}}}``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = {k: (p.grad if p.grad is not None else np.zeros_like(p.value))
                for k, p in params.items()}

    f0 = float(f().value)
    report = {}
    for name, p in params.items():
        flat = p.value.reshape(-1)
        num = np.zeros(flat.size)
        excluded = np.zeros(flat.size, bool)
        for t in range(flat.size):
            orig = flat[t]
            flat[t] = orig + eps
            fp = float(f().value)
            flat[t] = orig - eps
            fm = float(f().value)
            flat[t] = orig
            fwd, bwd = (fp - f0) / eps, (f0 - fm) / eps
            num[t] = (fp - fm) / (2 * eps)
            scale_ = max(abs(fwd), abs(bwd), 1e-6)
            if abs(fwd - bwd) > kink_tol * scale_ and abs(fwd - bwd) > 1e3 * eps:
                excluded[t] = True
        ana = analytic[name].reshape(-1).astype(np.float64)
        keep = ~excluded
        diff = np.abs(ana - num)[keep]
        denom = max(np.max(np.abs(ana[keep]), initial=0.0),
                    np.max(np.abs(num[keep]), initial=0.0), 1e-12)
        err = float(np.max(diff, initial=0.0) / denom)
        report[name] = {"max_rel_error": err, "passed": err < tol,
                        "checked": int(keep.sum()), "excluded": int(excluded.sum())}
    for p in params.values():
        p.grad = None
    return {"passed": all(r["passed"] for r in report.values()), "params": report}
