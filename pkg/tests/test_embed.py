import numpy as np
import pytest

from mimcr.catalog import make_catalog
from mimcr.embed import (
    EmbeddingStore,
    NodeSpace,
    TripleSet,
    build_triples,
    fallback_random_init,
    filtered_mean_rank,
    transe_scores,
    transe_train,
)


def test_node_space_packing():
    s = NodeSpace(2, 3, 4)
    assert s.num_nodes == 9
    assert (s.user(1), s.item(0), s.attr(0)) == (1, 2, 5)
    assert s.unpack(6) == ("attr", 1)


def test_build_triples_counts():
    cat = make_catalog([{0, 1}, {2}], [0, 0, 1], [(0, 0), (1, 1)])
    assert len(build_triples(cat, cat.interactions)) == 5
    t = build_triples(cat, [])
    assert len(t) == 3 and set(t.triples[:, 1]) == {1}


def test_epochs_zero_is_init():
    cat = make_catalog([{0}], [0], [(0, 0)])
    t = build_triples(cat, cat.interactions)
    store = transe_train(t, d=4, epochs=0, seed=3)
    ref = fallback_random_init(t.space, 4, seed=3)
    np.testing.assert_array_equal(store.node_embeddings, ref.node_embeddings)
    assert np.all(np.abs(store.node_embeddings) <= 6 / 2)


def test_init_classes_differ_and_seeded():
    space = NodeSpace(3, 3, 3)
    a = fallback_random_init(space, 5, seed=0).node_embeddings
    b = fallback_random_init(space, 5, seed=0).node_embeddings
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a[:3], a[3:6])
    d1 = fallback_random_init(space, 1, seed=0).node_embeddings
    assert d1.shape == (9, 1) and np.all(np.abs(d1) <= 6)


def test_empty_triples():
    with pytest.raises(ValueError):
        transe_train(TripleSet(np.zeros((0, 3), dtype=np.int64), NodeSpace(1, 1, 1)))


def test_tiny_kg_beats_random():
    # 4 nodes, 4 triples
    space = NodeSpace(1, 2, 1)
    t = TripleSet(np.array([[0, 0, 1], [0, 0, 2], [1, 1, 3], [2, 1, 3]]), space)
    store = transe_train(t, d=8, epochs=200, seed=0, lr=0.05)
    assert filtered_mean_rank(store, t) < (space.num_nodes + 1) / 2


def test_loss_decreases_and_deterministic():
    cat = make_catalog([{0, 1}, {1, 2}, {2}], [0, 0, 1], [(0, 0), (0, 1), (1, 2)])
    t = build_triples(cat, cat.interactions)
    a = transe_train(t, d=8, epochs=30, seed=1)
    b = transe_train(t, d=8, epochs=30, seed=1)
    np.testing.assert_array_equal(a.node_embeddings, b.node_embeddings)
    assert a.loss_history[-1] < a.loss_history[0]
    np.testing.assert_allclose(np.linalg.norm(a.node_embeddings, axis=1), 1.0, atol=1e-5)


def test_scores_hand():
    store = EmbeddingStore(np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.float32),
                           np.array([[1.0, 0.0]], dtype=np.float32), NodeSpace(1, 1, 0))
    np.testing.assert_allclose(transe_scores(store, np.array([[0, 0, 1], [1, 0, 0]])), [0.0, 2.0])


def test_store_round_trip(tmp_path):
    store = fallback_random_init(NodeSpace(2, 2, 2), 3, seed=0)
    store.save(tmp_path / "e.ckpt")
    back = EmbeddingStore.load(tmp_path / "e.ckpt")
    assert back.space == store.space
    np.testing.assert_array_equal(back.node_embeddings, store.node_embeddings)
