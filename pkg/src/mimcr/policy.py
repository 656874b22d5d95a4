"""Action space, dueling multi-interest Q-heads, and action construction."""
from dataclasses import dataclass

import numpy as np

from .encoder import coarse_attr_scores, coarse_item_scores
from .numeric import ops

ITEM = "item"
ATTR = "attr"
TOP = "top"
SUM = "sum"


class StarvedActionSpace(RuntimeError):
    """No candidate items and no candidate attributes remain."""


@dataclass(frozen=True)
class ActionSpace:
    items: tuple  # ranked by coarse item score
    attrs: tuple  # ranked by coarse attribute score
    item_scores: tuple = ()
    attr_scores: tuple = ()

    def actions(self):
        return [(ITEM, v) for v in self.items] + [(ATTR, p) for p in self.attrs]

    def __len__(self):
        return len(self.items) + len(self.attrs)


@dataclass(frozen=True)
class Ask:
    attr_type: int
    instances: tuple


@dataclass(frozen=True)
class Recommend:
    items: tuple


@dataclass(frozen=True)
class RewardConfig:
    r_rec_suc: float = 1.0
    r_rec_fail: float = -0.1
    r_ask_suc: float = 0.01
    r_ask_fail: float = 0.1
    r_quit: float = -0.3


def _top_k(ids, scores, k):
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))[:k]
    return tuple(ids[i] for i in order), tuple(float(scores[i]) for i in order)


def sample_action_space(state, catalog, store, k_v=10, k_p=10):
    if state.terminal:
        raise ValueError("no action space for a terminal state")
    items = sorted(state.cand_items)
    attrs = sorted(state.cand_attrs)
    if not items and not attrs:
        raise StarvedActionSpace("no candidate items or attribute instances left")
    iw = coarse_item_scores(state.user, items, state.accepted, state.rejected_attrs, store)
    aw = coarse_attr_scores(state.user, attrs, state.accepted, state.rejected_attrs, store)
    top_items, item_scores = _top_k(items, iw, k_v)
    top_attrs, attr_scores = _top_k(attrs, aw, k_p)
    return ActionSpace(top_items, top_attrs, item_scores, attr_scores)


# ---------------------------------------------------------------- Q-network

def mlp(x, w1, b1, w2, b2):
    """One hidden ReLU layer; returns (n x 1)."""
    hidden = ops.relu(ops.add(ops.matmul(x, ops.transpose(w1)), b1))
    return ops.add(ops.matmul(hidden, ops.transpose(w2)), b2)


def dueling_q(interests, action_embs, action_segments, value_head, advantage_head,
              num_segments=None, mean_correction=False):
    """Q(s, a) = max_k f_V(q_k) + f_A([q_k || e_a]).

    interests: list of K (B x d) tensors; action_embs: (P x d) tensor;
    action_segments: (P,) conversation index of each action row.  With
    ``mean_correction`` each advantage is centred on its conversation's
    mean advantage (classic dueling identifiability fix).
    """
    seg = np.asarray(action_segments, dtype=np.int64)
    if len(seg) == 0:
        return ops.Tensor(np.zeros(0))
    if num_segments is None:
        num_segments = int(seg.max()) + 1
    per_k = []
    for q in interests:
        q_rows = ops.take_rows(q, seg)
        value = mlp(q_rows, *value_head)
        adv = mlp(ops.concat([q_rows, action_embs], axis=1), *advantage_head)
        if mean_correction:
            counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
            avg = ops.segment_matrix(seg, num_segments, weights=1.0 / counts[seg])
            adv = ops.sub(adv, ops.take_rows(ops.spmm(avg, adv), seg))
        per_k.append(ops.add(value, adv))
    return ops.max(ops.concat(per_k, axis=1), axis=1)


# ---------------------------------------------------------------- decisions

def best_action(qvals):
    """Argmax over {(kind, id): Q}; ties prefer items, then lower ids."""
    if not qvals:
        raise ValueError("no Q-values to choose from")
    return min(qvals, key=lambda a: (-qvals[a], a[0] != ITEM, a[1]))


def decide_action(qvals):
    return ITEM if best_action(qvals)[0] == ITEM else ATTR


def select_question(attr_q, attr_type_of, strategy=TOP, k_a=2, backfill=(), forced=None):
    """Pick an attribute type and up to ``k_a`` of its instances.

    attr_q maps action-space instances to Q.  ``backfill`` lists further
    candidate instances (best first) used when the chosen type has fewer
    than ``k_a`` instances in the action space.  ``forced`` pins the type
    and the first instance (exploration).
    """
    if not attr_q:
        raise ValueError("no attribute instances to ask about")
    ranked = sorted(attr_q, key=lambda p: (-attr_q[p], p))
    if forced is not None:
        c = attr_type_of[forced]
    elif strategy == TOP:
        c = attr_type_of[ranked[0]]
    elif strategy == SUM:
        totals = {}
        for p, q in attr_q.items():
            totals[attr_type_of[p]] = totals.get(attr_type_of[p], 0.0) + q
        c = min(totals, key=lambda t: (-totals[t], t))
    else:
        raise ValueError(f"unknown question strategy {strategy!r}")
    chosen = [forced] if forced is not None else []
    chosen += [p for p in ranked if attr_type_of[p] == c and p not in chosen]
    chosen = chosen[:k_a]
    for p in backfill:
        if len(chosen) >= k_a:
            break
        if attr_type_of[p] == c and p not in chosen:
            chosen.append(p)
    return c, tuple(chosen)


def select_recommendation(item_q, k=10, forced=None):
    if not item_q:
        raise ValueError("no items to recommend")
    ranked = sorted(item_q, key=lambda v: (-item_q[v], v))
    if forced is not None:
        ranked = [forced] + [v for v in ranked if v != forced]
    return tuple(ranked[:k])


def turn_reward(feedback, cfg=RewardConfig(), quit=False):
    """Reward of one turn; ``quit`` adds the turn-cap penalty."""
    r = 0.0
    if feedback is not None:
        if feedback.is_question:
            r = len(feedback.accepted) * cfg.r_ask_suc + len(feedback.rejected) * cfg.r_ask_fail
        else:
            r = cfg.r_rec_suc if feedback.success else cfg.r_rec_fail
    if quit:
        r += cfg.r_quit
    return r
