"""Iterative multi-interest extraction over accepted attribute instances.

Each of the K interest heads scores every accepted instance against a query
(the fused user vector on the first pass, the head's previous interest
afterwards), softmax-normalises within the conversation, and pools.  From
the second pass on, the previous attention weights are added to the new
logits.
"""
from dataclasses import dataclass

import numpy as np

from .numeric import ops


@dataclass
class InterestSet:
    vectors: list  # K tensors, each (B x d)
    attention: list  # K arrays, each (N_total,) aligned with the accepted rows
    segments: np.ndarray  # conversation index of each accepted row

    def attention_for(self, b):
        """(K x N_b) attention matrix of conversation ``b``."""
        mask = self.segments == b
        return np.stack([a[mask] for a in self.attention])


def extract_interests_batch(v_hat_u, accepted, segments, heads, iterations, log_prior=False):
    """Batched extractor.

    v_hat_u: (B x d) Tensor; accepted: (N x d) Tensor of accepted-instance
    embeddings; segments: (N,) conversation index per accepted row;
    heads: list of (h_k (d,), W_k (d x 2d)) tensor pairs.
    """
    segments = np.asarray(segments, dtype=np.int64)
    b = v_hat_u.shape[0]
    if len(segments) == 0 or np.bincount(segments, minlength=b).min() == 0:
        raise ValueError("every conversation needs at least one accepted attribute instance")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    pool = ops.segment_matrix(segments, b)
    vectors, attention = [], []
    for h, w in heads:
        query = v_hat_u
        alpha = None
        for _ in range(iterations):
            q_rows = ops.take_rows(query, segments)
            hidden = ops.sigmoid(ops.matmul(ops.concat([q_rows, accepted], axis=1), ops.transpose(w)))
            logits = ops.reshape(ops.matmul(hidden, ops.reshape(h, (-1, 1))), (-1,))
            if alpha is not None:
                prior = ops.log(alpha) if log_prior else alpha
                logits = ops.add(logits, prior)
            alpha = ops.segment_softmax(logits, segments, b)
            query = ops.spmm(pool, ops.mul(ops.reshape(alpha, (-1, 1)), accepted))
        vectors.append(query)
        attention.append(alpha.data.copy())
    return InterestSet(vectors, attention, segments)


def extract_interests(v_hat_u, accepted_embs, heads, iterations, log_prior=False):
    """Single-conversation form: v_hat_u (d,), accepted_embs (N x d)."""
    v_hat_u = ops.as_tensor(v_hat_u)
    accepted_embs = ops.as_tensor(accepted_embs)
    n = accepted_embs.shape[0]
    if n == 0:
        raise ValueError("at least one accepted attribute instance is required")
    user = ops.reshape(v_hat_u, (1, -1))
    return extract_interests_batch(user, accepted_embs, np.zeros(n, dtype=np.int64), heads, iterations,
                                   log_prior)
