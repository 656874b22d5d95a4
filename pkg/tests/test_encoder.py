import numpy as np
import pytest

from mimcr.catalog import make_catalog
from mimcr.dialog_state import init_state
from mimcr.embed import HAS_ATTR, INTERACT, EmbeddingStore, NodeSpace
from mimcr.encoder import (
    ATTR_ACC,
    ATTR_CAND,
    ITEM_CAND,
    USER_NODE,
    CurrentGraph,
    build_current_graph,
    build_global_graph,
    coarse_attr_score,
    coarse_item_score,
    fuse_user_rejected,
    gate_fuse,
    gcn_forward,
    ggnn_forward,
)
from mimcr.numeric import Tensor


def store_for(cat, emb):
    space = NodeSpace.of(cat)
    return EmbeddingStore(np.asarray(emb, dtype=np.float32), np.zeros((2, emb.shape[1]), np.float32), space)


def test_coarse_scores():
    cat = make_catalog([{0, 1}], [0, 0], [(0, 0)])
    zero = store_for(cat, np.zeros((4, 2)))
    assert coarse_item_score(0, 0, [], [], zero) == 0.5
    emb = np.array([[1.0, 0], [1.0, 0], [0, 3.0], [0, 3.0]])
    s = store_for(cat, emb)
    assert coarse_item_score(0, 0, [], [], s) == pytest.approx(0.73106, abs=1e-5)
    # accepted and rejected terms cancel
    assert coarse_attr_score(0, 0, [1], [1], store_for(cat, np.zeros((4, 2)) + [[0, 0], [0, 0], [0, 1], [0, 5]])) == 0.5


def toy():
    # v0={p1,p2}, v1={p2,p3}, v2={p3}
    return make_catalog([{1, 2}, {2, 3}, {3}], [0, 0, 1, 1], [(0, 0)])


def test_current_graph_init():
    cat = toy()
    store = store_for(cat, np.random.default_rng(0).normal(size=(cat.num_nodes, 3)))
    g = build_current_graph(init_state(0, 2, cat), cat, store)
    assert list(g.kinds) == [USER_NODE, ATTR_ACC, ATTR_CAND, ATTR_CAND, ITEM_CAND, ITEM_CAND]
    space = NodeSpace.of(cat)
    assert list(g.gids) == [0, space.attr(2), space.attr(1), space.attr(3), space.item(0), space.item(1)]
    edges = {tuple(e): w for e, w in zip(g.edges.tolist(), g.weights)}
    assert edges[(0, 1)] == 1.0  # user - accepted
    assert (1, 4) in edges and (1, 5) in edges and (2, 4) in edges and (3, 5) in edges
    for k, v in ((4, 0), (5, 1)):
        assert edges[(0, k)] == pytest.approx(coarse_item_score(0, v, {2}, set(), store), rel=1e-6)
    assert len(edges) == 7


def test_current_graph_empty_candidates():
    from dataclasses import replace
    cat = toy()
    store = store_for(cat, np.zeros((cat.num_nodes, 2)))
    s = replace(init_state(0, 2, cat), cand_items=frozenset(), cand_attrs=frozenset())
    g = build_current_graph(s, cat, store)
    assert g.num_nodes == 2 and len(g.edges) == 1


def test_gcn_isolated_node():
    g = CurrentGraph(np.array([0]), np.array([0]), np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    x = np.array([[1.0, -2.0]])
    out = gcn_forward(g, x, [np.eye(2), np.eye(2) * 3])
    np.testing.assert_allclose(out.data, [[1.0, 0.0]])


def test_gcn_two_nodes_hand():
    g = CurrentGraph(np.array([0, 1]), np.array([0, 1]), np.array([[0, 1]]), np.array([1.0]))
    x = np.array([[1.0, 2.0], [3.0, 0.5]])
    out = gcn_forward(g, x, [np.eye(2)])
    np.testing.assert_allclose(out.data, [[4.0, 2.5], [4.0, 2.5]])


def test_gcn_weighted_degree_normalisation():
    g = CurrentGraph(np.array([0, 1, 2]), np.zeros(3), np.array([[0, 1], [0, 2]]), np.array([1.0, 3.0]))
    a = g.adjacency().toarray()
    deg = np.array([4.0, 1.0, 3.0])
    assert a[0, 1] == pytest.approx(1 / np.sqrt(deg[0] * deg[1]))
    assert a[2, 0] == pytest.approx(1 / np.sqrt(deg[0] * deg[2]))


def ggnn_toy():
    # 2 users (user 1 has no interactions), 1 item, 1 instance
    cat = make_catalog([{0}], [0], [(0, 0)], num_users=2)
    return cat, build_global_graph(cat, cat.interactions)


def layer(d, b=0.0):
    return [{rel: (np.eye(d), np.full(d, b)) for rel in (INTERACT, HAS_ATTR)}]


def test_ggnn_item_mean_hand():
    cat, g = ggnn_toy()
    s = np.array([[1.0, 2.0], [5.0, 5.0], [0.0, 0.0], [3.0, -4.0]])  # u0, u1, v0, p0
    out = ggnn_forward(g, s, layer(2), "mean").data
    np.testing.assert_allclose(out[2], np.maximum((s[0] + s[3]) / 2, 0))
    np.testing.assert_allclose(out[0], np.maximum(s[2], 0))
    np.testing.assert_allclose(out[3], np.maximum(s[2], 0))
    summed = ggnn_forward(g, s, layer(2), "sum").data
    np.testing.assert_allclose(summed[2], np.maximum(s[0] + s[3], 0))


def test_ggnn_isolated_user_bias_only():
    cat, g = ggnn_toy()
    s = np.ones((4, 2))
    out = ggnn_forward(g, s, [{r: (np.eye(2), np.array([0.5, -1.0])) for r in (0, 1)}]).data
    np.testing.assert_allclose(out[1], [0.5, 0.0])
    assert not g.connected[1] and g.connected[0]


def test_ggnn_bad_accum():
    cat, g = ggnn_toy()
    with pytest.raises(ValueError):
        ggnn_forward(g, np.ones((4, 2)), layer(2), "max")


def test_gate_zero_weights_average(rng):
    e, s = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    out = gate_fuse(Tensor(e), Tensor(s), Tensor(np.zeros((4, 8)))).data
    np.testing.assert_allclose(out, (e + s) / 2, rtol=1e-6)


def test_gate_fixed_point_and_saturation(rng):
    e = rng.normal(size=(2, 3))
    w = rng.normal(size=(3, 6))
    np.testing.assert_allclose(gate_fuse(Tensor(e), Tensor(e), Tensor(w)).data, e, rtol=1e-6)
    s = np.abs(rng.normal(size=(2, 3))) + 1
    big = np.zeros((3, 6))
    big[:, 3:] = 100 * np.eye(3)
    np.testing.assert_allclose(gate_fuse(Tensor(np.zeros((2, 3))), Tensor(s), Tensor(big)).data, s, atol=1e-6)


def test_gate_absent_rows_pass_through(rng):
    e, s = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    out = gate_fuse(Tensor(e), Tensor(s), Tensor(rng.normal(size=(3, 6))), present=[False, True]).data
    np.testing.assert_allclose(out[0], e[0], rtol=1e-6)


def test_rejected_fusion(rng):
    v = rng.normal(size=(1, 3))
    sg = rng.normal(size=(5, 3))
    np.testing.assert_allclose(fuse_user_rejected(Tensor(v), [[]], Tensor(sg), Tensor(np.eye(3))).data, v)
    np.testing.assert_allclose(fuse_user_rejected(Tensor(v), [[2]], Tensor(sg), Tensor(np.eye(3))).data,
                               v + sg[2], rtol=1e-6)
    sg[4] = -sg[3]
    np.testing.assert_allclose(fuse_user_rejected(Tensor(v), [[3, 4]], Tensor(sg), Tensor(np.eye(3))).data,
                               v, atol=1e-6)
