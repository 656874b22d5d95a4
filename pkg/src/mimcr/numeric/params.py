"""Named parameter store, gradient extraction, and Adam."""
import numpy as np

from .tensor import Tensor, backward


class ParamStore:
    """Ordered map name -> trainable Tensor, plus Adam first/second moments."""

    def __init__(self, arrays=None):
        self.params = {}
        self.m = {}
        self.v = {}
        self.t = 0
        for name, arr in (arrays or {}).items():
            self.add(name, arr)

    def add(self, name, array):
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        data = np.array(array, dtype=np.float32)
        self.params[name] = Tensor(data, requires_grad=True, name=name)
        self.m[name] = np.zeros_like(data)
        self.v[name] = np.zeros_like(data)
        return self.params[name]

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def names(self):
        return list(self.params)

    def arrays(self):
        return {k: t.data for k, t in self.params.items()}

    def copy(self, dtype=None):
        """Deep copy (moments included), optionally recast for float64 checks."""
        out = ParamStore()
        for k, t in self.params.items():
            data = t.data.copy() if dtype is None else t.data.astype(dtype)
            out.params[k] = Tensor(data, requires_grad=True, name=k)
            out.params[k].data = data
            out.m[k] = self.m[k].copy()
            out.v[k] = self.v[k].copy()
        out.t = self.t
        return out

    def load_arrays(self, arrays):
        """Overwrite parameter values in place (shapes must match)."""
        for k, arr in arrays.items():
            if self.params[k].shape != np.shape(arr):
                raise ValueError(f"shape mismatch for {k}: {self.params[k].shape} vs {np.shape(arr)}")
            self.params[k].data = np.array(arr, dtype=self.params[k].data.dtype)

    def equal(self, other):
        return self.names() == other.names() and all(
            np.array_equal(self.params[k].data, other.params[k].data) for k in self.params
        )


def grad(loss, params):
    """Exact reverse-mode gradients of a scalar loss for every parameter.

    Parameters the loss does not depend on get zero arrays.
    """
    names = params.names()
    gs = backward(loss, [params[n] for n in names])
    return {n: np.asarray(g, dtype=params[n].data.dtype) for n, g in zip(names, gs)}


def adam_step(params, grads, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, trainable=None):
    """One bias-corrected Adam update, in place.  Returns ``params``.

    ``trainable`` optionally restricts which names are updated; the rest keep
    their values and moments.
    """
    names = params.names() if trainable is None else [n for n in params.names() if n in trainable]
    missing = [n for n in names if n not in grads]
    if missing:
        raise KeyError(f"missing gradient for {missing[0]!r}")
    b1, b2 = betas
    params.t += 1
    c1 = 1.0 - b1 ** params.t
    c2 = 1.0 - b2 ** params.t
    for n in names:
        p = params[n]
        g = np.asarray(grads[n], dtype=np.float64)
        m = b1 * params.m[n].astype(np.float64) + (1 - b1) * g
        v = b2 * params.v[n].astype(np.float64) + (1 - b2) * g * g
        params.m[n] = m.astype(np.float32)
        params.v[n] = v.astype(np.float32)
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = (p.data.astype(np.float64) - step).astype(p.data.dtype)
    return params
