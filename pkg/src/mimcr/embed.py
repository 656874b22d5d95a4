"""Knowledge-graph construction and TransE pretraining of node embeddings.

All nodes share one id space: users first, then items, then attribute
instances.  Two relations exist, ``interact`` (user -> item) and
``has_attr`` (item -> attribute instance).
"""
from dataclasses import dataclass, field

import numpy as np

from .numeric.checkpoint import read_arrays, write_arrays

INTERACT = 0
HAS_ATTR = 1
NUM_RELATIONS = 2

USER, ITEM, ATTR = "user", "item", "attr"


@dataclass(frozen=True)
class NodeSpace:
    num_users: int
    num_items: int
    num_attr_instances: int

    @classmethod
    def of(cls, catalog):
        return cls(catalog.num_users, catalog.num_items, catalog.num_attr_instances)

    @property
    def num_nodes(self):
        return self.num_users + self.num_items + self.num_attr_instances

    def user(self, u):
        return u

    def item(self, v):
        return self.num_users + v

    def attr(self, p):
        return self.num_users + self.num_items + p

    def unpack(self, gid):
        if gid < 0 or gid >= self.num_nodes:
            raise IndexError(f"node id {gid} out of range")
        if gid < self.num_users:
            return USER, gid
        gid -= self.num_users
        if gid < self.num_items:
            return ITEM, gid
        return ATTR, gid - self.num_items


@dataclass(frozen=True)
class TripleSet:
    triples: np.ndarray  # (n, 3) int64 rows of (head, relation, tail)
    space: NodeSpace

    def __len__(self):
        return len(self.triples)


def build_triples(catalog, train_pairs):
    space = NodeSpace.of(catalog)
    rows = set()
    for u, v in train_pairs:
        rows.add((space.user(u), INTERACT, space.item(v)))
    for v, attrs in enumerate(catalog.item_attrs):
        for p in attrs:
            rows.add((space.item(v), HAS_ATTR, space.attr(p)))
    arr = np.array(sorted(rows), dtype=np.int64).reshape(-1, 3)
    return TripleSet(arr, space)


@dataclass
class EmbeddingStore:
    node_embeddings: np.ndarray
    relation_embeddings: np.ndarray
    space: NodeSpace
    loss_history: list = field(default_factory=list, compare=False)

    @property
    def dim(self):
        return self.node_embeddings.shape[1]

    def user(self, u):
        return self.node_embeddings[self.space.user(u)]

    def item(self, v):
        return self.node_embeddings[self.space.item(v)]

    def attr(self, p):
        return self.node_embeddings[self.space.attr(p)]

    def save(self, path):
        s = self.space
        write_arrays(path, {
            "node_emb": self.node_embeddings,
            "rel_emb": self.relation_embeddings,
            "node_counts": np.array([s.num_users, s.num_items, s.num_attr_instances], dtype=np.float32),
        })

    @classmethod
    def load(cls, path):
        arrays = read_arrays(path)
        counts = [int(x) for x in arrays["node_counts"]]
        return cls(arrays["node_emb"], arrays["rel_emb"], NodeSpace(*counts))


def _init_range(d):
    return 6.0 / np.sqrt(d)


def fallback_random_init(space, d, seed=0):
    """Seeded uniform init in [-6/sqrt(d), 6/sqrt(d)].

    Each entity class (users, items, instances, relations) draws from its
    own child stream of the seed, so classes never share values.
    """
    if d < 1:
        raise ValueError("embedding dimension must be >= 1")
    bound = _init_range(d)
    streams = np.random.SeedSequence(seed).spawn(4)
    blocks = []
    for ss, n in zip(streams[:3], (space.num_users, space.num_items, space.num_attr_instances)):
        rng = np.random.default_rng(ss)
        blocks.append(rng.uniform(-bound, bound, size=(n, d)))
    rel = np.random.default_rng(streams[3]).uniform(-bound, bound, size=(NUM_RELATIONS, d))
    return EmbeddingStore(np.concatenate(blocks).astype(np.float32), rel.astype(np.float32), space)


def _normalize_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def transe_train(triples, d=64, epochs=30, margin=1.0, lr=0.01, neg_per_pos=1, seed=0,
                 batch_size=256):
    """Margin-ranking TransE with L2 distance and uniform head/tail corruption.

    Entity vectors are renormalised to unit length at the end of every
    epoch.  ``loss_history`` on the result holds the mean loss per epoch.
    """
    if len(triples) == 0:
        raise ValueError("cannot train TransE on an empty triple set")
    store = fallback_random_init(triples.space, d, seed)
    if epochs == 0:
        return store
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(5)[4])
    ent = store.node_embeddings.astype(np.float64)
    rel = _normalize_rows(store.relation_embeddings.astype(np.float64))
    n_nodes = ent.shape[0]
    pos_all = np.repeat(triples.triples, neg_per_pos, axis=0)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(pos_all))
        total = 0.0
        for start in range(0, len(order), batch_size):
            pos = pos_all[order[start:start + batch_size]]
            neg = pos.copy()
            swap_head = rng.random(len(pos)) < 0.5
            repl = rng.integers(0, n_nodes, size=len(pos))
            neg[swap_head, 0] = repl[swap_head]
            neg[~swap_head, 2] = repl[~swap_head]

            dp = ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]]
            dn = ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]
            np_ = np.linalg.norm(dp, axis=1)
            nn_ = np.linalg.norm(dn, axis=1)
            loss = margin + np_ - nn_
            active = loss > 0
            total += loss[active].sum()
            if not active.any():
                continue
            gp = dp[active] / np.maximum(np_[active], 1e-12)[:, None]
            gn = dn[active] / np.maximum(nn_[active], 1e-12)[:, None]
            p, q = pos[active], neg[active]
            g_ent = np.zeros_like(ent)
            g_rel = np.zeros_like(rel)
            np.add.at(g_ent, p[:, 0], gp)
            np.add.at(g_ent, p[:, 2], -gp)
            np.add.at(g_rel, p[:, 1], gp)
            np.add.at(g_ent, q[:, 0], -gn)
            np.add.at(g_ent, q[:, 2], gn)
            np.add.at(g_rel, q[:, 1], -gn)
            ent -= lr * g_ent
            rel -= lr * g_rel
        ent = _normalize_rows(ent)
        history.append(total / len(pos_all))
    return EmbeddingStore(ent.astype(np.float32), rel.astype(np.float32), triples.space, history)


def transe_scores(store, triples):
    """Distance ||h + r - t|| per triple (lower = more plausible)."""
    t = np.asarray(triples.triples if isinstance(triples, TripleSet) else triples)
    e, r = store.node_embeddings.astype(np.float64), store.relation_embeddings.astype(np.float64)
    return np.linalg.norm(e[t[:, 0]] + r[t[:, 1]] - e[t[:, 2]], axis=1)


def filtered_mean_rank(store, triples):
    """Mean 1-based rank of each true tail among all nodes, other true tails filtered."""
    t = np.asarray(triples.triples if isinstance(triples, TripleSet) else triples)
    e, r = store.node_embeddings.astype(np.float64), store.relation_embeddings.astype(np.float64)
    known = {}
    for h, rr, tt in t:
        known.setdefault((h, rr), set()).add(tt)
    ranks = []
    for h, rr, tt in t:
        dist = np.linalg.norm(e[h] + r[rr] - e, axis=1)
        mask = np.ones(len(e), dtype=bool)
        mask[list(known[(h, rr)] - {tt})] = False
        ranks.append(1 + int(np.sum(dist[mask] < dist[tt])))
    return float(np.mean(ranks))
