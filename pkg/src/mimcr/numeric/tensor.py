"""Define-by-run reverse-mode autodiff over numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients.  The tape is
rebuilt on every forward pass, so graphs may change shape from one call
to the next.
"""
import contextlib
import threading

import numpy as np
import scipy.sparse as sp

_state = threading.local()


def _cfg():
    if not hasattr(_state, "dtype"):
        _state.dtype = np.float32
        _state.grad_enabled = True
        _state.debug = False
    return _state


def get_dtype():
    return _cfg().dtype


@contextlib.contextmanager
def precision(dtype):
    """Run ops in ``dtype`` (float32 by default; float64 for gradient checks)."""
    cfg = _cfg()
    old = cfg.dtype
    cfg.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        cfg.dtype = old


@contextlib.contextmanager
def no_grad():
    cfg = _cfg()
    old = cfg.grad_enabled
    cfg.grad_enabled = False
    try:
        yield
    finally:
        cfg.grad_enabled = old


def set_debug(flag):
    """When on, every op asserts its output is finite."""
    _cfg().debug = bool(flag)


class Tensor:
    __slots__ = ("data", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        arr = np.asarray(data)
        if arr.dtype != get_dtype():
            arr = arr.astype(get_dtype())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.parents = _parents
        self.backward_fn = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _make(data, parents, backward):
    cfg = _cfg()
    if cfg.debug and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value produced by op")
    track = cfg.grad_enabled and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _check_broadcast(a, b, opname):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{opname}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        return (_unbroadcast(g, a.shape) if a.requires_grad else None,
                _unbroadcast(g, b.shape) if b.requires_grad else None)

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.shape) if b.requires_grad else None)

    return _make(a.data * b.data, (a, b), backward)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return _make(np.maximum(x.data, 0), (x,), backward)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x):
    x = as_tensor(x)
    y = _sigmoid(x.data)

    def backward(g):
        return (g * y * (1 - y),)

    return _make(y, (x,), backward)


def log(x, floor=1e-30):
    x = as_tensor(x)
    safe = np.maximum(x.data, floor)

    def backward(g):
        return (g / safe,)

    return _make(np.log(safe), (x,), backward)


def square(x):
    x = as_tensor(x)

    def backward(g):
        return (2 * g * x.data,)

    return _make(x.data * x.data, (x,), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), backward)


# ---------------------------------------------------------------- reductions

def sum(x, axis=None, keepdims=False):  # noqa: A001
    x = as_tensor(x)
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64), dtype=get_dtype())

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.data.dtype),)

    return _make(out, (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def max(x, axis=-1):  # noqa: A001
    """Max along one axis; the gradient flows to the first maximal entry."""
    x = as_tensor(x)
    idx = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        return (g @ bd.T if a.requires_grad else None,
                ad.T @ g if b.requires_grad else None)

    return _make(ad @ bd, (a, b), backward)


def spmm(matrix, x):
    """Constant sparse (or dense ndarray) matrix times a 2-D tensor."""
    x = as_tensor(x)
    if matrix.shape[1] != x.shape[0]:
        raise ValueError(f"spmm: incompatible shapes {matrix.shape} and {x.shape}")
    dt = get_dtype()
    if matrix.dtype != dt:
        matrix = matrix.astype(dt)
    out = np.asarray(matrix @ x.data.astype(dt, copy=False))
    mt = matrix.T

    def backward(g):
        return (np.asarray(mt @ g.astype(dt, copy=False)),)

    return _make(out, (x,), backward)


def transpose(x):
    x = as_tensor(x)

    def backward(g):
        return (g.T,)

    return _make(x.data.T, (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)

    def backward(g):
        return (g.reshape(x.shape),)

    return _make(x.data.reshape(shape), (x,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors[1:]:
        a, b = list(tensors[0].shape), list(t.shape)
        a.pop(axis)
        b.pop(axis)
        if a != b:
            raise ValueError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def index(x, idx):
    """Basic or advanced indexing; repeated indices accumulate gradient."""
    x = as_tensor(x)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _make(x.data[idx], (x,), backward)


def _scatter_matrix(rows, n, dtype):
    """(n x len(rows)) 0/1 matrix M with M[rows[i], i] = 1."""
    order = np.argsort(rows, kind="stable")
    indptr = np.searchsorted(rows[order], np.arange(n + 1))
    return sp.csr_matrix((np.ones(len(rows), dtype=dtype), order, indptr), shape=(n, len(rows)))


def take_rows(x, rows):
    """Gather rows of a 2-D tensor by an integer array."""
    rows = np.asarray(rows, dtype=np.int64)
    x = as_tensor(x)
    n = x.shape[0]

    def backward(g):
        if len(rows) == 0:
            return (np.zeros_like(x.data),)
        return (np.asarray(_scatter_matrix(rows, n, g.dtype) @ g),)

    return _make(x.data[rows], (x,), backward)


# ---------------------------------------------------------------- segment ops

def segment_matrix(segments, num_segments, weights=None):
    """Sparse (num_segments x n) matrix summing entries into their segments."""
    segments = np.asarray(segments, dtype=np.int64)
    vals = np.ones(len(segments)) if weights is None else np.asarray(weights, dtype=np.float64)
    vals = vals.astype(get_dtype())
    return sp.csr_matrix((vals, (segments, np.arange(len(segments)))), shape=(num_segments, len(segments)))


def segment_sum(x, segments, num_segments):
    return spmm(segment_matrix(segments, num_segments), x)


def segment_softmax(x, segments, num_segments):
    """Softmax of a 1-D tensor independently within each segment."""
    x = as_tensor(x)
    segments = np.asarray(segments, dtype=np.int64)
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, segments, x.data.astype(np.float64))
    e = np.exp(x.data.astype(np.float64) - seg_max[segments])
    denom = np.bincount(segments, weights=e, minlength=num_segments)
    y64 = e / denom[segments]
    dt = get_dtype()

    def backward(g):
        g64 = g.astype(np.float64)
        dot = np.bincount(segments, weights=g64 * y64, minlength=num_segments)
        return ((y64 * (g64 - dot[segments])).astype(dt),)

    return _make(y64.astype(dt), (x,), backward)


# ---------------------------------------------------------------- backprop

def _topo(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss, wrt):
    """Gradients of scalar ``loss`` w.r.t. each tensor in ``wrt`` (list).

    Tensors not reached by the recorded computation get zero gradients.
    """
    if loss.data.size != 1:
        raise ValueError(f"gradient requires a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        for node in reversed(_topo(loss)):
            g = grads.get(id(node))
            if g is None or node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
    return [grads.get(id(t), np.zeros_like(t.data)) for t in wrt]
