"""The MCMIPL network: graph encoder, interest extractor and Q-heads wired
together over batches of conversation states, plus the greedy agent.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .embed import HAS_ATTR, INTERACT, NodeSpace
from .encoder import build_current_graph, fuse_user_rejected, gate_fuse, gcn_layers, ggnn_layers
from .interest import extract_interests_batch
from .numeric import ParamStore, no_grad, ops
from .policy import (
    ATTR,
    ITEM,
    Ask,
    Recommend,
    best_action,
    dueling_q,
    sample_action_space,
    select_question,
    select_recommendation,
)


def xavier(rng, shape):
    fan_out, fan_in = shape[0], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(store, cfg, seed=0):
    """Fresh ParamStore; node embeddings start from ``store``."""
    d, h = cfg.d, cfg.hidden
    if store.dim != d:
        raise ValueError(f"embedding store has dim {store.dim}, config expects {d}")
    rng = np.random.default_rng(seed)
    p = ParamStore()
    p.add("node_emb", store.node_embeddings)
    for l in range(cfg.l_c):
        p.add(f"cur.W.{l}", xavier(rng, (d, d)))
    for l in range(cfg.l_g):
        for rel in (INTERACT, HAS_ATTR):
            p.add(f"glob.{rel}.W.{l}", xavier(rng, (d, d)))
            p.add(f"glob.{rel}.b.{l}", np.zeros(d))
    p.add("gate.W", xavier(rng, (d, 2 * d)))
    p.add("user.W_rej", xavier(rng, (d, d)))
    for k in range(cfg.k_i):
        p.add(f"interest.h.{k}", xavier(rng, (1, d))[0])
        p.add(f"interest.W.{k}", xavier(rng, (d, 2 * d)))
    p.add("qv.W1", xavier(rng, (h, d)))
    p.add("qv.b1", np.zeros(h))
    p.add("qv.W2", xavier(rng, (1, h)))
    p.add("qv.b2", np.zeros(1))
    p.add("qa.W1", xavier(rng, (h, 2 * d)))
    p.add("qa.b1", np.zeros(h))
    p.add("qa.W2", xavier(rng, (1, h)))
    p.add("qa.b2", np.zeros(1))
    return p


@dataclass
class StateFeatures:
    """Precomputed, parameter-independent view of one conversation state."""
    gids: np.ndarray
    adj_rows: np.ndarray
    adj_cols: np.ndarray
    adj_vals: np.ndarray
    accepted_rows: np.ndarray
    rejected_gids: np.ndarray
    index: dict


class MCMIPL:
    """Holds the static context (catalog, frozen pretrained embeddings,
    global graph, config) and evaluates Q-values for any ParamStore."""

    def __init__(self, catalog, store, global_graph, cfg):
        self.catalog = catalog
        self.store = store
        self.graph = global_graph
        self.cfg = cfg
        self.space = NodeSpace.of(catalog)

    # -------------------------------------------------------------- features

    def featurize(self, state):
        g = build_current_graph(state, self.catalog, self.store)
        rows, cols, vals = g.adjacency_entries(self.cfg.weighted_messages)
        acc = np.arange(1, 1 + len(state.accepted), dtype=np.int64)
        rej = [self.space.item(v) for v in sorted(state.rejected_items)]
        rej += [self.space.attr(p) for p in sorted(state.rejected_attrs)]
        return StateFeatures(g.gids, rows, cols, vals, acc, np.array(rej, dtype=np.int64), g.local_index())

    def action_gid(self, action):
        kind, x = action
        return self.space.item(x) if kind == ITEM else self.space.attr(x)

    # -------------------------------------------------------------- forward

    def global_embeddings(self, params):
        layers = []
        for l in range(self.cfg.l_g):
            layers.append({rel: (params[f"glob.{rel}.W.{l}"], params[f"glob.{rel}.b.{l}"])
                           for rel in (INTERACT, HAS_ATTR)})
        return ggnn_layers(self.graph, params["node_emb"], layers, self.cfg.accum)

    def forward(self, params, feats, actions, s_g=None):
        """Q-values for ``actions[b]`` (lists of (kind, id)) under ``feats[b]``.

        Returns (q, segments, interests) where q is a flat Tensor over all
        requested actions and segments maps each entry to its state.
        """
        cfg = self.cfg
        emb = params["node_emb"]
        if s_g is None:
            s_g = self.global_embeddings(params)
        sizes = np.array([len(f.gids) for f in feats])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        total = int(sizes.sum())
        gids = np.concatenate([f.gids for f in feats])
        adj = sp.csr_matrix(
            (np.concatenate([f.adj_vals for f in feats]).astype(ops.get_dtype()),
             (np.concatenate([f.adj_rows + o for f, o in zip(feats, offsets)]),
              np.concatenate([f.adj_cols + o for f, o in zip(feats, offsets)]))),
            shape=(total, total),
        )
        e_c = gcn_layers(adj, ops.take_rows(emb, gids), [params[f"cur.W.{l}"] for l in range(cfg.l_c)])
        fused = gate_fuse(e_c, ops.take_rows(s_g, gids), params["gate.W"], self.graph.connected[gids])

        v_u = ops.take_rows(fused, offsets)
        v_hat = fuse_user_rejected(v_u, [f.rejected_gids for f in feats], s_g, params["user.W_rej"])
        acc_rows = np.concatenate([f.accepted_rows + o for f, o in zip(feats, offsets)])
        acc_seg = np.concatenate([np.full(len(f.accepted_rows), b) for b, f in enumerate(feats)]).astype(np.int64)
        heads = [(params[f"interest.h.{k}"], params[f"interest.W.{k}"]) for k in range(cfg.k_i)]
        interests = extract_interests_batch(v_hat, ops.take_rows(fused, acc_rows), acc_seg, heads,
                                            cfg.iterations, cfg.log_prior)

        rows, seg = [], []
        fallback = []
        for b, (f, acts) in enumerate(zip(feats, actions)):
            for a in acts:
                gid = self.action_gid(a)
                loc = f.index.get(gid)
                if loc is None:
                    fallback.append(len(rows))
                    rows.append(total + gid)  # initial embedding row
                else:
                    rows.append(offsets[b] + loc)
                seg.append(b)
        table = ops.concat([fused, emb], axis=0) if fallback else fused
        e_a = ops.take_rows(table, np.array(rows, dtype=np.int64))
        value = (params["qv.W1"], params["qv.b1"], params["qv.W2"], params["qv.b2"])
        adv = (params["qa.W1"], params["qa.b1"], params["qa.W2"], params["qa.b2"])
        q = dueling_q(interests.vectors, e_a, np.array(seg, dtype=np.int64), value, adv,
                      num_segments=len(feats), mean_correction=cfg.dueling_mean)
        return q, np.array(seg, dtype=np.int64), interests

    def q_values(self, params, state, space, feats=None):
        """{(kind, id): Q} over an action space, without recording a tape."""
        acts = space.actions()
        with no_grad():
            q, _, interests = self.forward(params, [feats or self.featurize(state)], [acts])
        return {a: float(x) for a, x in zip(acts, q.data)}, interests


def construct_action(qvals, space, catalog, cfg, forced=None):
    """Turn Q-values (and an optional exploratory action) into a concrete
    question or recommendation.  Returns (Ask | Recommend, stored action)."""
    chosen = forced if forced is not None else best_action(qvals)
    if chosen[0] == ITEM:
        item_q = {a[1]: q for a, q in qvals.items() if a[0] == ITEM}
        items = select_recommendation(item_q, cfg.rec_k, forced=chosen[1] if forced is not None else None)
        return Recommend(items), (ITEM, items[0])
    attr_q = {a[1]: q for a, q in qvals.items() if a[0] == ATTR}
    c, inst = select_question(attr_q, catalog.attr_type_of, cfg.strategy, cfg.k_a,
                              backfill=space.attrs, forced=chosen[1] if forced is not None else None)
    return Ask(c, inst), (ATTR, inst[0])


class MCMIPLAgent:
    """Greedy policy over a frozen parameter snapshot."""

    def __init__(self, model, params):
        self.model = model
        self.params = params
        self.last_attention = None

    def act(self, state, rng=None):
        space = sample_action_space(state, self.model.catalog, self.model.store, self.model.cfg.k_v,
                                    self.model.cfg.k_p)
        qvals, interests = self.model.q_values(self.params, state, space)
        self.last_attention = interests.attention_for(0)
        action, _ = construct_action(qvals, space, self.model.catalog, self.model.cfg)
        return action
