"""Conversation state and its transitions.

The candidate item set after every question is recomputed from scratch:

* ``union`` keeps items carrying the seed instance, at least one accepted
  instance and no rejected one;
* ``intersection`` additionally requires every accepted instance.
"""
import json
from dataclasses import dataclass, field, replace

UNION = "union"
INTERSECTION = "intersection"


@dataclass(frozen=True)
class ConversationState:
    user: int
    seed_instance: int
    turn: int = 0
    accepted: frozenset = frozenset()
    rejected_attrs: frozenset = frozenset()
    rejected_items: frozenset = frozenset()
    cand_attrs: frozenset = frozenset()
    cand_items: frozenset = frozenset()
    terminal: bool = False
    success: bool = False
    seed_items: frozenset = field(default=frozenset(), compare=False, repr=False)


def _attrs_of(items, catalog):
    out = set()
    for v in items:
        out |= catalog.item_attrs[v]
    return out


def init_state(user, p0, catalog):
    if not 0 <= p0 < catalog.num_attr_instances:
        raise ValueError(f"invalid seed instance {p0}")
    items = catalog.items_with_attr[p0]
    if not items:
        raise ValueError(f"seed instance {p0} is not associated with any item")
    return ConversationState(
        user=user,
        seed_instance=p0,
        accepted=frozenset([p0]),
        cand_items=frozenset(items),
        cand_attrs=frozenset(_attrs_of(items, catalog) - {p0}),
        seed_items=frozenset(items),
    )


def candidate_items(seed_items, accepted, rejected_attrs, rejected_items, catalog, mode=UNION):
    out = set()
    for v in seed_items:
        if v in rejected_items:
            continue
        attrs = catalog.item_attrs[v]
        if attrs & rejected_attrs:
            continue
        if mode == UNION:
            if attrs & accepted:
                out.add(v)
        elif mode == INTERSECTION:
            if accepted <= attrs:
                out.add(v)
        else:
            raise ValueError(f"unknown candidate mode {mode!r}")
    return frozenset(out)


def update_after_question(state, cur_acc, cur_rej, catalog, mode=UNION, prune_attrs=True):
    cur_acc, cur_rej = frozenset(cur_acc), frozenset(cur_rej)
    if cur_acc & cur_rej:
        raise ValueError(f"instances both accepted and rejected: {sorted(cur_acc & cur_rej)}")
    accepted = state.accepted | cur_acc
    rejected = state.rejected_attrs | cur_rej
    cand_attrs = state.cand_attrs - cur_acc - cur_rej
    seed_items = state.seed_items or catalog.items_with_attr[state.seed_instance]
    items = candidate_items(seed_items, accepted, rejected, state.rejected_items, catalog, mode)
    if prune_attrs:
        cand_attrs = frozenset(cand_attrs & _attrs_of(items, catalog)) - accepted - rejected
    return replace(
        state,
        turn=state.turn + 1,
        accepted=accepted,
        rejected_attrs=rejected,
        cand_attrs=frozenset(cand_attrs),
        cand_items=items,
        seed_items=seed_items,
    )


def update_after_recommendation(state, recommended, success, catalog=None, prune_attrs=True):
    recommended = list(recommended)
    for v in recommended:
        if v in state.rejected_items:
            raise ValueError(f"item {v} was already rejected")
        if v not in state.cand_items:
            raise ValueError(f"item {v} is not a candidate")
    if success:
        return replace(state, turn=state.turn + 1, terminal=True, success=True)
    items = state.cand_items - frozenset(recommended)
    cand_attrs = state.cand_attrs
    if prune_attrs and catalog is not None:
        cand_attrs = frozenset(cand_attrs & _attrs_of(items, catalog))
    return replace(
        state,
        turn=state.turn + 1,
        rejected_items=state.rejected_items | frozenset(recommended),
        cand_items=items,
        cand_attrs=cand_attrs,
    )


def finish(state):
    """Mark a state terminal without success (turn cap or starvation)."""
    return replace(state, terminal=True)


def transcript_record(turn, action, items_or_attrs, accepted, rejected, state, reward, **extra):
    rec = {
        "turn": turn,
        "action": action,
        "asked" if action == "ask" else "recommended": [int(x) for x in items_or_attrs],
        "accepted": sorted(int(x) for x in accepted),
        "rejected": sorted(int(x) for x in rejected),
        "n_cand_items": len(state.cand_items),
        "n_cand_attrs": len(state.cand_attrs),
        "reward": float(reward),
    }
    rec.update(extra)
    return rec


def dump_transcript(records, path):
    """One JSON object per line."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
