# A synthetic catalog, a multi-interest episode, and the simulated user.
#
# The user wants any one of N_v items.  Those items share at least one
# attribute instance, and the conversation starts from one of the shared
# instances (p0).
import numpy as np

from mimcr.catalog import SynthSpec, synth_catalog, split_interactions
from mimcr.dialog_state import init_state, update_after_question
from mimcr.scenario import answer_question, answer_recommendation, sample_episode

cat = synth_catalog(SynthSpec(num_users=50, num_items=120, num_attr_instances=20, num_attr_types=4), seed=0)
split = split_interactions(cat, seed=0)
print(f"{cat.num_items} items, {len(cat.interactions)} interactions, "
      f"{len(split.train)}/{len(split.valid)}/{len(split.test)} train/valid/test pairs")

ep = None
for pair in split.train:
    ep = sample_episode(cat, pair, n_v=2, seed=1)
    if ep is not None:
        break
print("acceptable items:", sorted(ep.acceptable_items))
for v in sorted(ep.acceptable_items):
    print(f"  item {v}: instances {sorted(cat.item_attrs[v])}")
print("shared instances:", sorted(ep.shared_instances), " seed instance p0 =", ep.seed_instance)

# the user accepts an instance if ANY acceptable item carries it
state = init_state(ep.user, ep.seed_instance, cat)
asked = sorted(state.cand_attrs)[:3]
fb = answer_question(ep, cat, asked)
print(f"\nasked {asked} -> accepted {sorted(fb.accepted)}, rejected {sorted(fb.rejected)}")

# union vs intersection candidate sets after the same answer
for mode in ("union", "intersection"):
    s = update_after_question(state, fb.accepted, fb.rejected, cat, mode)
    hit = len(s.cand_items & ep.acceptable_items)
    print(f"{mode:>12}: {len(s.cand_items):3d} candidates, {hit} of the acceptable items still in")

# recommendations are judged by the best-ranked acceptable item
rec = [v for v in sorted(state.cand_items) if v not in ep.acceptable_items][:3] + sorted(ep.acceptable_items)
print("\nrecommend", rec, "->", answer_recommendation(ep, rec))
