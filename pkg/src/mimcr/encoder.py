"""Graph user encoder.

Two graphs feed the node representations:

* the per-turn *current graph* over the user, accepted and candidate
  attribute instances and candidate items, encoded by a residual GCN whose
  normalisation uses weighted degrees;
* the static heterogeneous *global graph* of training interactions and
  item-instance links, encoded by a relation-aware GNN.

Both outputs are fused per node by a sigmoid gate.  Every layer function
works on stacked rows, so a block-diagonal adjacency encodes a whole
batch of conversation graphs in one pass.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .embed import HAS_ATTR, INTERACT, NodeSpace
from .numeric import ops

USER_NODE, ATTR_ACC, ATTR_CAND, ITEM_CAND = 0, 1, 2, 3


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _preference_vector(user, accepted, rejected, store):
    z = store.user(user).astype(np.float64).copy()
    for p in accepted:
        z += store.attr(p)
    for p in rejected:
        z -= store.attr(p)
    return z


def coarse_item_score(u, v, accepted, rejected, store):
    """sigmoid(e_u.e_v + sum_acc e_v.e_p - sum_rej e_v.e_p)."""
    z = _preference_vector(u, accepted, rejected, store)
    return float(_sigmoid(store.item(v).astype(np.float64) @ z))


def coarse_attr_score(u, p, accepted, rejected, store):
    z = _preference_vector(u, accepted, rejected, store)
    return float(_sigmoid(store.attr(p).astype(np.float64) @ z))


def coarse_item_scores(u, items, accepted, rejected, store):
    """Vectorised :func:`coarse_item_score` over a list of items."""
    z = _preference_vector(u, accepted, rejected, store)
    if len(items) == 0:
        return np.zeros(0)
    idx = [store.space.item(v) for v in items]
    return _sigmoid(store.node_embeddings[idx].astype(np.float64) @ z)


def coarse_attr_scores(u, attrs, accepted, rejected, store):
    z = _preference_vector(u, accepted, rejected, store)
    if len(attrs) == 0:
        return np.zeros(0)
    idx = [store.space.attr(p) for p in attrs]
    return _sigmoid(store.node_embeddings[idx].astype(np.float64) @ z)


# ---------------------------------------------------------------- current graph

@dataclass
class CurrentGraph:
    gids: np.ndarray  # global node id per local node
    kinds: np.ndarray  # USER_NODE / ATTR_ACC / ATTR_CAND / ITEM_CAND
    edges: np.ndarray  # (m, 2) local endpoints, each undirected edge once
    weights: np.ndarray  # (m,)

    @property
    def num_nodes(self):
        return len(self.gids)

    def degrees(self):
        deg = np.zeros(self.num_nodes)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg

    def local_index(self):
        return {int(g): i for i, g in enumerate(self.gids)}

    def adjacency_entries(self, weighted_messages=False):
        """(rows, cols, vals) of the symmetric degree-normalised adjacency."""
        deg = self.degrees()
        if len(self.edges) == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        i, j = self.edges[:, 0], self.edges[:, 1]
        vals = 1.0 / np.sqrt(deg[i] * deg[j])
        if weighted_messages:
            vals = vals * self.weights
        return np.concatenate([i, j]), np.concatenate([j, i]), np.concatenate([vals, vals])

    def adjacency(self, weighted_messages=False):
        r, c, v = self.adjacency_entries(weighted_messages)
        return sp.csr_matrix((v, (r, c)), shape=(self.num_nodes, self.num_nodes))


def build_current_graph(state, catalog, store):
    space = NodeSpace.of(catalog)
    acc = sorted(state.accepted)
    cand_p = sorted(state.cand_attrs)
    cand_v = sorted(state.cand_items)
    gids = [space.user(state.user)]
    kinds = [USER_NODE]
    gids += [space.attr(p) for p in acc]
    kinds += [ATTR_ACC] * len(acc)
    gids += [space.attr(p) for p in cand_p]
    kinds += [ATTR_CAND] * len(cand_p)
    gids += [space.item(v) for v in cand_v]
    kinds += [ITEM_CAND] * len(cand_v)

    attr_local = {p: 1 + i for i, p in enumerate(acc + cand_p)}
    item_base = 1 + len(acc) + len(cand_p)
    edges, weights = [], []
    for i in range(len(acc)):
        edges.append((0, 1 + i))
        weights.append(1.0)
    for k, v in enumerate(cand_v):
        for p in catalog.item_attrs[v]:
            loc = attr_local.get(p)
            if loc is not None:
                edges.append((loc, item_base + k))
                weights.append(1.0)
    if cand_v:
        w = coarse_item_scores(state.user, cand_v, state.accepted, state.rejected_attrs, store)
        for k in range(len(cand_v)):
            edges.append((0, item_base + k))
            weights.append(float(w[k]))
    return CurrentGraph(
        gids=np.array(gids, dtype=np.int64),
        kinds=np.array(kinds, dtype=np.int8),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        weights=np.array(weights, dtype=np.float64),
    )


def gcn_layers(adj, h, weights):
    """h <- ReLU(A (h W^T) + h) for each W; ``adj`` is a constant matrix."""
    for w in weights:
        h = ops.relu(ops.add(ops.spmm(adj, ops.matmul(h, ops.transpose(w))), h))
    return h


def gcn_forward(graph, node_emb, weights, weighted_messages=False):
    """Current-graph embeddings, one row per ``graph.gids`` entry.

    ``node_emb`` holds the initial embedding of every node in the global id
    space (array or Tensor).
    """
    if len(weights) < 1:
        raise ValueError("the current-graph GCN needs at least one layer")
    h0 = ops.take_rows(ops.as_tensor(node_emb), graph.gids)
    return gcn_layers(graph.adjacency(weighted_messages), h0, weights)


# ---------------------------------------------------------------- global graph

@dataclass
class GlobalGraph:
    space: NodeSpace
    adjacency: dict  # relation -> normalised (N x N) csr matrix
    neighbors: dict  # relation -> list of neighbor arrays per node
    degree: dict  # relation -> |N_r(n)| per node
    user_mask: np.ndarray
    item_mask: np.ndarray
    attr_mask: np.ndarray

    @property
    def connected(self):
        """True for nodes with at least one neighbour under any relation."""
        return (self.degree[INTERACT] + self.degree[HAS_ATTR]) > 0


def build_global_graph(catalog, train_pairs):
    """Heterogeneous graph built from the training interactions only."""
    space = NodeSpace.of(catalog)
    n = space.num_nodes
    edge_lists = {
        INTERACT: sorted({(space.user(u), space.item(v)) for u, v in train_pairs}),
        HAS_ATTR: sorted((space.attr(p), space.item(v)) for v, attrs in enumerate(catalog.item_attrs)
                         for p in attrs),
    }
    adjacency, neighbors, degree = {}, {}, {}
    for rel, pairs in edge_lists.items():
        pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        deg = np.zeros(n)
        np.add.at(deg, pairs[:, 0], 1.0)
        np.add.at(deg, pairs[:, 1], 1.0)
        a, b = pairs[:, 0], pairs[:, 1]
        vals = 1.0 / np.sqrt(deg[a] * deg[b]) if len(pairs) else np.zeros(0)
        adjacency[rel] = sp.csr_matrix(
            (np.concatenate([vals, vals]).astype(np.float32), (np.concatenate([a, b]), np.concatenate([b, a]))),
            shape=(n, n),
        )
        nb = [[] for _ in range(n)]
        for x, y in pairs:
            nb[x].append(int(y))
            nb[y].append(int(x))
        neighbors[rel] = [np.array(sorted(z), dtype=np.int64) for z in nb]
        degree[rel] = deg
    ids = np.arange(n)
    return GlobalGraph(
        space=space,
        adjacency=adjacency,
        neighbors=neighbors,
        degree=degree,
        user_mask=(ids < space.num_users),
        item_mask=(ids >= space.num_users) & (ids < space.num_users + space.num_items),
        attr_mask=(ids >= space.num_users + space.num_items),
    )


def ggnn_layers(graph, s, layers, accum="mean"):
    """Relational message passing over the global graph.

    ``layers`` is a list of dicts ``{relation: (W, b)}``.  Users keep the
    interaction message, instances the attribute message, items accumulate
    both.
    """
    if accum not in ("mean", "sum"):
        raise ValueError(f"accum must be 'mean' or 'sum', got {accum!r}")
    dt = s.data.dtype if hasattr(s, "data") else np.float32
    um = graph.user_mask[:, None].astype(dt)
    am = graph.attr_mask[:, None].astype(dt)
    im = graph.item_mask[:, None].astype(dt) * (0.5 if accum == "mean" else 1.0)
    for layer in layers:
        msgs = {}
        for rel, (w, b) in layer.items():
            msgs[rel] = ops.add(ops.spmm(graph.adjacency[rel], ops.matmul(s, ops.transpose(w))), b)
        mixed = ops.add(
            ops.add(ops.mul(msgs[INTERACT], um), ops.mul(msgs[HAS_ATTR], am)),
            ops.mul(ops.add(msgs[INTERACT], msgs[HAS_ATTR]), im),
        )
        s = ops.relu(mixed)
    return s


def ggnn_forward(graph, node_emb, layers, accum="mean"):
    if len(layers) < 1:
        raise ValueError("the global GNN needs at least one layer")
    return ggnn_layers(graph, ops.as_tensor(node_emb), layers, accum)


# ---------------------------------------------------------------- fusion

def gate_fuse(e_c, s_g, w_gated, present=None):
    """g = sigmoid(W [e_c || s_g]);  v = g * s_g + (1 - g) * e_c.

    Rows whose ``present`` flag is False (no global-graph neighbours) pass
    ``e_c`` through unchanged.
    """
    g = ops.sigmoid(ops.matmul(ops.concat([e_c, s_g], axis=1), ops.transpose(w_gated)))
    if present is not None:
        g = ops.mul(g, np.asarray(present, dtype=g.data.dtype)[:, None])
    return ops.add(ops.mul(g, s_g), ops.mul(ops.sub(1.0, g), e_c))


def rejected_mean_matrix(rejected_gids, num_nodes):
    """(B x N) constant matrix whose row b averages sample b's rejected nodes."""
    rows, cols, vals = [], [], []
    for b, gids in enumerate(rejected_gids):
        gids = list(gids)
        for g in gids:
            rows.append(b)
            cols.append(g)
            vals.append(1.0 / len(gids))
    return sp.csr_matrix((np.array(vals, dtype=ops.get_dtype()), (rows, cols)),
                         shape=(len(rejected_gids), num_nodes))


def fuse_user_rejected(v_u, rejected_gids, s_g, w_u):
    """v_u + W_u mean(s_g over rejected nodes); identity when nothing was rejected.

    ``v_u`` is (B x d); ``rejected_gids`` has one id collection per row.
    """
    mean_rej = ops.spmm(rejected_mean_matrix(rejected_gids, s_g.shape[0]), s_g)
    return ops.add(v_u, ops.matmul(mean_rej, ops.transpose(w_u)))
