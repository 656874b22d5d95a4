# Short online training run and a comparison with the two heuristic
# baselines on held-out episodes.  A few hundred episodes already beat
# Abs Greedy; the acceptance run uses 2,000.
import time

import numpy as np

from mimcr.catalog import SynthSpec, split_interactions, synth_catalog
from mimcr.config import TrainConfig
from mimcr.embed import build_triples, transe_train
from mimcr.evaluation import AbsGreedyAgent, MaxEntropyAgent, evaluate
from mimcr.model import MCMIPLAgent
from mimcr.scenario import sample_episodes
from mimcr.trainer import Trainer, moving_average

cat = synth_catalog(SynthSpec(200, 500, 60, 8), seed=0)
split = split_interactions(cat, seed=0)
store = transe_train(build_triples(cat, split.train), d=64, epochs=30, seed=0)
cfg = TrainConfig(episodes=400, batch_size=16, lr=1e-3, r_ask_fail=-0.1, freeze_embeddings=True)
test_eps = sample_episodes(cat, split.test, 200, cfg.n_v, seed=12345)

for name, agent in (("abs greedy", AbsGreedyAgent(store, cfg)), ("max entropy", MaxEntropyAgent(cat, store, cfg))):
    rep = evaluate(agent, test_eps, cat, cfg)
    print(f"{name:>12}: SR@15 {rep.sr:.3f}  AT {rep.at:.2f}  hDCG {rep.hdcg:.3f}")

t0 = time.time()
trainer = Trainer(cat, split, store, cfg)
params, log = trainer.run(progress=lambda r: r["episode"] % 100 == 99 and print(
    f"  episode {r['episode'] + 1}: eps {r['epsilon']:.2f}, "
    f"SR(last 100) {np.mean([x['success'] for x in trainer.log[-100:]]):.2f}"))
print(f"trained {cfg.episodes} episodes in {time.time() - t0:.0f}s")
ma = moving_average([r["reward"] for r in log], 100)
print(f"100-episode reward average: {ma[0]:.3f} -> {ma[-1]:.3f}")

rep = evaluate(MCMIPLAgent(trainer.model, params), test_eps, cat, cfg)
print(f"{'MCMIPL':>12}: SR@15 {rep.sr:.3f}  AT {rep.at:.2f}  hDCG {rep.hdcg:.3f}")
print("SR@t:", np.round(rep.sr_curve, 2))
