import numpy as np
import pytest

from mimcr.catalog import make_catalog
from mimcr.dialog_state import init_state
from mimcr.embed import EmbeddingStore, NodeSpace
from mimcr.numeric import Tensor
from mimcr.policy import (
    ATTR,
    ITEM,
    StarvedActionSpace,
    best_action,
    decide_action,
    dueling_q,
    sample_action_space,
    select_question,
    select_recommendation,
    turn_reward,
)
from mimcr.scenario import SimFeedback


def flat_store(cat, d=2):
    return EmbeddingStore(np.zeros((cat.num_nodes, d), np.float32), np.zeros((2, d), np.float32),
                          NodeSpace.of(cat))


def test_action_space_truncation_and_ties():
    cat = make_catalog([{0, 1}, {0, 2}, {0, 3}], [0, 0, 1, 1], [(0, 0)])
    s = init_state(0, 0, cat)
    space = sample_action_space(s, cat, flat_store(cat), k_v=10, k_p=2)
    assert space.items == (0, 1, 2)
    assert space.attrs == (1, 2)


def test_action_space_starved():
    from dataclasses import replace
    cat = make_catalog([{0}], [0], [(0, 0)])
    s = replace(init_state(0, 0, cat), cand_items=frozenset(), cand_attrs=frozenset())
    with pytest.raises(StarvedActionSpace):
        sample_action_space(s, cat, flat_store(cat))


def heads(rng, d, h):
    v = tuple(Tensor(x) for x in (rng.normal(size=(h, d)), rng.normal(size=h), rng.normal(size=(1, h)),
                                  rng.normal(size=1)))
    a = tuple(Tensor(x) for x in (rng.normal(size=(h, 2 * d)), rng.normal(size=h), rng.normal(size=(1, h)),
                                  rng.normal(size=1)))
    return v, a


def mlp_np(x, w1, b1, w2, b2):
    return (np.maximum(x @ w1.data.T + b1.data, 0) @ w2.data.T + b2.data)[:, 0]


def test_dueling_single_interest(rng):
    v, a = heads(rng, 3, 5)
    q = rng.normal(size=(1, 3))
    e = rng.normal(size=(4, 3))
    out = dueling_q([Tensor(q)], Tensor(e), np.zeros(4, int), v, a).data
    want = mlp_np(q, *v) + mlp_np(np.concatenate([np.tile(q, (4, 1)), e], axis=1), *a)
    np.testing.assert_allclose(out, want, rtol=1e-5)
    dup = dueling_q([Tensor(q), Tensor(q)], Tensor(e), np.zeros(4, int), v, a).data
    np.testing.assert_allclose(dup, out)


def test_dueling_mean_correction(rng):
    v, a = heads(rng, 3, 5)
    q = Tensor(rng.normal(size=(2, 3)))
    e = Tensor(rng.normal(size=(5, 3)))
    seg = np.array([0, 0, 1, 1, 1])
    plain = dueling_q([q], e, seg, v, a).data
    cent = dueling_q([q], e, seg, v, a, mean_correction=True).data
    for b in range(2):
        diff = plain[seg == b] - cent[seg == b]
        np.testing.assert_allclose(diff, diff[0], rtol=1e-5)


def test_decisions():
    assert decide_action({(ATTR, 3): 0.1}) == ATTR
    assert decide_action({(ITEM, 1): 0.9, (ATTR, 3): 0.5}) == ITEM
    assert decide_action({(ITEM, 1): 0.5, (ATTR, 3): 0.5}) == ITEM
    assert best_action({(ITEM, 4): 0.5, (ITEM, 2): 0.5}) == (ITEM, 2)


TYPES = {1: "A", 2: "B", 3: "B"}


def test_question_top_and_sum():
    q = {1: 0.9, 2: 0.8, 3: 0.7}
    assert select_question(q, TYPES, "top", k_a=2) == ("A", (1,))
    assert select_question(q, TYPES, "sum", k_a=2) == ("B", (2, 3))
    assert select_question({2: 0.1}, TYPES, "top") == ("B", (2,))


def test_question_forced_and_backfill():
    q = {1: 0.9, 2: 0.8}
    assert select_question(q, TYPES, "top", k_a=2, forced=2) == ("B", (2,))
    assert select_question(q, TYPES, "top", k_a=2, backfill=(3,), forced=2) == ("B", (2, 3))


def test_recommendation_order():
    assert select_recommendation({5: 0.1, 3: 0.9, 7: 0.5}, k=10) == (3, 7, 5)
    assert select_recommendation({5: 0.0, 3: 0.0}, k=10) == (3, 5)
    assert select_recommendation({5: 0.1, 3: 0.9}, k=1, forced=5) == (5,)


def test_rewards():
    assert turn_reward(SimFeedback(frozenset({1, 2}), frozenset({3}))) == pytest.approx(0.12)
    assert turn_reward(SimFeedback(success=True, rank=1, is_question=False)) == 1.0
    assert turn_reward(SimFeedback(is_question=False)) == pytest.approx(-0.1)
    assert turn_reward(SimFeedback()) == 0.0
    assert turn_reward(None, quit=True) == pytest.approx(-0.3)
