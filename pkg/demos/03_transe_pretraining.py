# TransE node embeddings on the user-item / item-instance knowledge graph.
import numpy as np

from mimcr.catalog import SynthSpec, split_interactions, synth_catalog
from mimcr.embed import build_triples, fallback_random_init, filtered_mean_rank, transe_train

cat = synth_catalog(SynthSpec(200, 500, 60, 8), seed=0)
split = split_interactions(cat, seed=0)
triples = build_triples(cat, split.train)
print(f"{len(triples)} triples over {triples.space.num_nodes} nodes")

store = transe_train(triples, d=64, epochs=30, seed=0)
print("loss per epoch:", np.round(store.loss_history[::5], 3))

# ranking on a sample of training triples, against the untrained init
sample = triples.triples[np.random.default_rng(0).choice(len(triples), 300, replace=False)]
print(f"filtered mean rank, random init: {filtered_mean_rank(fallback_random_init(triples.space, 64, 0), sample):.1f}")
print(f"filtered mean rank, TransE:      {filtered_mean_rank(store, sample):.1f}")
print(f"random expectation:              {(triples.space.num_nodes + 1) / 2:.1f}")
