"""Success-rate / average-turn / hDCG evaluation and heuristic baselines."""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dialog_state import finish, init_state, transcript_record
from .encoder import coarse_item_scores
from .policy import Ask, Recommend, StarvedActionSpace
from .trainer import reward_config, step_environment


def hdcg_episode(turn, rank, max_turns, k):
    """Turn-and-rank discounted credit of one successful episode.

    ``turn=None`` (or 0) marks a failure and scores 0.
    """
    if not turn:
        return 0.0
    if not 1 <= turn <= max_turns:
        raise ValueError(f"success turn {turn} outside 1..{max_turns}")
    if not 1 <= rank <= k:
        raise ValueError(f"success rank {rank} outside 1..{k}")
    now = 1.0 / math.log2(turn + 1)
    nxt = 1.0 / math.log2(turn + 2)
    return now + (now - nxt) / math.log2(rank + 1)


@dataclass
class EpisodeRecord:
    index: int
    success: bool
    turn: int  # success turn, or max_turns on failure
    rank: int  # best rank on success, else 0
    reward: float = 0.0


@dataclass
class EvalReport:
    sr_curve: list
    at: float
    hdcg: float
    episodes: list = field(default_factory=list)

    @property
    def sr(self):
        return self.sr_curve[-1] if self.sr_curve else 0.0

    def to_json(self):
        d = {
            "sr_curve": [float(x) for x in self.sr_curve],
            "sr": float(self.sr),
            "at": float(self.at),
            "hdcg": float(self.hdcg),
            "episodes": [asdict(r) for r in self.episodes],
        }
        return json.dumps(d, sort_keys=True, indent=1)


def summarize(records, max_turns, k):
    n = len(records)
    sr_curve = []
    for t in range(1, max_turns + 1):
        sr_curve.append(sum(1 for r in records if r.success and r.turn <= t) / n)
    at = sum(r.turn if r.success else max_turns for r in records) / n
    hdcg = sum(hdcg_episode(r.turn if r.success else None, r.rank, max_turns, k) for r in records) / n
    return EvalReport(sr_curve, at, hdcg, sorted(records, key=lambda r: r.index))


def run_episode(agent, episode, catalog, cfg, rng=None, transcript=None):
    """Roll out one episode greedily; returns an EpisodeRecord (index 0)."""
    rewards = reward_config(cfg)
    state = init_state(episode.user, episode.seed_instance, catalog)
    total = 0.0
    while not state.terminal:
        try:
            action = agent.act(state, rng=rng)
        except StarvedActionSpace:
            state = finish(state)
            break
        nxt, fb, r = step_environment(state, action, episode, catalog, cfg, rewards)
        total += r
        if transcript is not None:
            if isinstance(action, Ask):
                transcript.append(transcript_record(nxt.turn, "ask", action.instances, fb.accepted,
                                                    fb.rejected, nxt, r, attr_type=action.attr_type))
            else:
                transcript.append(transcript_record(nxt.turn, "recommend", action.items,
                                                    [], [], nxt, r, success=fb.success, rank=fb.rank))
        state = nxt
        if fb.success:
            return EpisodeRecord(0, True, state.turn, fb.rank, total)
    return EpisodeRecord(0, False, episode.max_turns, 0, total)


def evaluate(agent, episodes, catalog, cfg, seed=0, jobs=1):
    """Greedy evaluation over fixed episodes.

    Each episode gets its own RNG derived from (seed, index), so results do
    not depend on scheduling when ``jobs > 1``.
    """
    if not episodes:
        raise ValueError("no episodes to evaluate")

    def one(i):
        rng = np.random.default_rng([seed, i])
        rec = run_episode(agent, episodes[i], catalog, cfg, rng)
        rec.index = i
        return rec

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, range(len(episodes))))
    else:
        records = [one(i) for i in range(len(episodes))]
    return summarize(records, cfg.max_turns, cfg.rec_k)


# ---------------------------------------------------------------- baselines

def _ranked_items(state, store, k):
    items = sorted(state.cand_items)
    if not items:
        raise StarvedActionSpace("no candidate items to recommend")
    w = coarse_item_scores(state.user, items, state.accepted, state.rejected_attrs, store)
    order = sorted(range(len(items)), key=lambda i: (-w[i], items[i]))
    return tuple(items[i] for i in order[:k])


def baseline_abs_greedy(state, store, cfg):
    """Always recommend the top-K candidates by coarse item score."""
    return Recommend(_ranked_items(state, store, cfg.rec_k))


def binary_entropy(f):
    if f <= 0.0 or f >= 1.0:
        return 0.0
    return -(f * math.log2(f) + (1 - f) * math.log2(1 - f))


def attribute_entropies(state, catalog):
    """{instance: H(fraction of candidate items containing it)} over cand_attrs."""
    n = len(state.cand_items)
    counts = dict.fromkeys(state.cand_attrs, 0)
    for v in state.cand_items:
        for p in catalog.item_attrs[v]:
            if p in counts:
                counts[p] += 1
    return {p: binary_entropy(c / n) if n else 0.0 for p, c in counts.items()}


def baseline_max_entropy(state, catalog, store, cfg, rng, rho=0.3):
    """Ask the max-entropy instances of the max-entropy type, or with
    probability ``rho`` (or when nothing is left to ask) recommend."""
    if not state.cand_attrs or rng.random() < rho:
        if state.cand_items:
            return Recommend(_ranked_items(state, store, cfg.rec_k))
        if not state.cand_attrs:
            raise StarvedActionSpace("nothing left to ask or recommend")
    ent = attribute_entropies(state, catalog)
    ranked = sorted(ent, key=lambda p: (-ent[p], p))
    c = catalog.attr_type_of[ranked[0]]
    chosen = tuple(p for p in ranked if catalog.attr_type_of[p] == c)[: cfg.k_a]
    return Ask(c, chosen)


class AbsGreedyAgent:
    def __init__(self, store, cfg):
        self.store = store
        self.cfg = cfg

    def act(self, state, rng=None):
        return baseline_abs_greedy(state, self.store, self.cfg)


class MaxEntropyAgent:
    def __init__(self, catalog, store, cfg, rho=0.3):
        self.catalog = catalog
        self.store = store
        self.cfg = cfg
        self.rho = rho

    def act(self, state, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        return baseline_max_entropy(state, self.catalog, self.store, self.cfg, rng, self.rho)
