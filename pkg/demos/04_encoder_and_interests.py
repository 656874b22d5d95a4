# One forward pass of the policy network on a real conversation state:
# current graph -> GCN, global graph -> relational GNN, gate, interests, Q.
import numpy as np

from mimcr.catalog import SynthSpec, split_interactions, synth_catalog
from mimcr.config import TrainConfig
from mimcr.dialog_state import init_state, update_after_question
from mimcr.embed import build_triples, transe_train
from mimcr.encoder import build_current_graph, build_global_graph
from mimcr.model import MCMIPL, construct_action, init_params
from mimcr.policy import sample_action_space
from mimcr.scenario import answer_question, sample_episodes

cat = synth_catalog(SynthSpec(100, 200, 30, 6), seed=3)
split = split_interactions(cat, seed=3)
store = transe_train(build_triples(cat, split.train), d=32, epochs=10, seed=3)
cfg = TrainConfig(d=32, hidden=32, k_i=2, iterations=2)
model = MCMIPL(cat, store, build_global_graph(cat, split.train), cfg)
params = init_params(store, cfg, seed=0)

ep = sample_episodes(cat, split.train, 1, n_v=2, seed=5)[0]
state = init_state(ep.user, ep.seed_instance, cat)
# answer one question so that there are two accepted instances to attend over
first = sorted(state.cand_attrs)[:4]
fb = answer_question(ep, cat, first)
state = update_after_question(state, fb.accepted, fb.rejected, cat)

g = build_current_graph(state, cat, store)
print(f"current graph: {g.num_nodes} nodes, {len(g.edges)} edges; accepted {sorted(state.accepted)}")

space = sample_action_space(state, cat, store, cfg.k_v, cfg.k_p)
qvals, interests = model.q_values(params, state, space)
print("attention (one row per interest):")
print(np.round(interests.attention_for(0), 3))
best = sorted(qvals.items(), key=lambda kv: -kv[1])[:5]
print("top Q-values:", [(k, round(q, 3)) for k, q in best])
action, _ = construct_action(qvals, space, cat, cfg)
print("untrained agent would:", action)
