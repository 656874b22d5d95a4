# The small reverse-mode autodiff core used by every trainable module.
# Here we check its gradients against central differences in float64.
import numpy as np
import scipy.sparse as sp

from mimcr.numeric import ParamStore, adam_step, grad, ops, precision

rng = np.random.default_rng(0)
adj = sp.random(6, 6, density=0.5, random_state=1, format="csr")
segments = np.array([0, 0, 1, 1, 1, 2])


def loss_fn(p):
    h = ops.relu(ops.add(ops.spmm(adj, ops.matmul(p["x"], ops.transpose(p["w"]))), p["x"]))
    scores = ops.reshape(ops.matmul(ops.sigmoid(h), p["v"]), (-1,))
    alpha = ops.segment_softmax(scores, segments, 3)
    pooled = ops.segment_sum(ops.mul(ops.reshape(alpha, (-1, 1)), h), segments, 3)
    return ops.mean(ops.square(pooled))


with precision(np.float64):
    p = ParamStore()
    p.add("x", rng.normal(size=(6, 4)))
    p.add("w", rng.normal(size=(4, 4)))
    p.add("v", rng.normal(size=(4, 1)))
    g = grad(loss_fn(p), p)
    for name in p.names():
        x = p[name].data
        fd = np.zeros_like(x)
        for i in np.ndindex(x.shape):
            old = x[i]
            x[i] = old + 1e-6
            hi = loss_fn(p).item()
            x[i] = old - 1e-6
            lo = loss_fn(p).item()
            x[i] = old
            fd[i] = (hi - lo) / 2e-6
        print(f"{name}: max |analytic - numeric| = {np.abs(g[name] - fd).max():.2e}")

# a few Adam steps on the same loss (default float32 this time)
p32 = ParamStore({k: v for k, v in p.arrays().items()})
for step in range(5):
    loss = loss_fn(p32)
    adam_step(p32, grad(loss, p32), lr=0.05)
    print(f"step {step}: loss {loss.item():.5f}")
