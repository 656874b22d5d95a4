"""Multi-interest episodes and the rule-based simulated user."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EpisodeSpec:
    user: int
    acceptable_items: frozenset
    shared_instances: frozenset
    seed_instance: int
    max_turns: int = 15

    @property
    def n_v(self):
        return len(self.acceptable_items)


@dataclass(frozen=True)
class SimFeedback:
    accepted: frozenset = frozenset()
    rejected: frozenset = frozenset()
    success: bool = False
    rank: int = 0  # 1-based best rank on success, else 0
    is_question: bool = True


def sample_episode(catalog, pair, n_v, seed, max_turns=15):
    """Grow an acceptable item set around ``pair``'s anchor item.

    Companions are drawn uniformly among items that keep the running
    attribute intersection non-empty and whose attribute set differs from
    every item chosen so far.  Returns None when no such companion exists.
    """
    if n_v < 1:
        raise ValueError(f"n_v must be >= 1, got {n_v}")
    user, anchor = pair
    rng = np.random.default_rng(seed)
    chosen = [anchor]
    inter = set(catalog.item_attrs[anchor])
    if not inter:
        return None
    for _ in range(n_v - 1):
        seen_sets = {catalog.item_attrs[v] for v in chosen}
        pool = set()
        for p in inter:
            pool |= catalog.items_with_attr[p]
        pool = sorted(v for v in pool if v not in chosen and catalog.item_attrs[v] not in seen_sets)
        if not pool:
            return None
        v = pool[int(rng.integers(len(pool)))]
        chosen.append(v)
        inter &= catalog.item_attrs[v]
    shared = sorted(inter)
    p0 = shared[int(rng.integers(len(shared)))]
    return EpisodeSpec(user, frozenset(chosen), frozenset(shared), p0, max_turns)


def episode_attrs(episode, catalog):
    """Union of the attribute sets of all acceptable items."""
    out = set()
    for v in episode.acceptable_items:
        out |= catalog.item_attrs[v]
    return frozenset(out)


def answer_question(episode, catalog, asked):
    asked = frozenset(asked)
    liked = episode_attrs(episode, catalog)
    acc = asked & liked
    return SimFeedback(accepted=acc, rejected=asked - acc, is_question=True)


def answer_recommendation(episode, recommended):
    recommended = list(recommended)
    if len(set(recommended)) != len(recommended):
        raise ValueError("recommendation list contains duplicate items")
    for i, v in enumerate(recommended, 1):
        if v in episode.acceptable_items:
            return SimFeedback(success=True, rank=i, is_question=False)
    return SimFeedback(success=False, is_question=False)


def sample_episodes(catalog, pairs, count, n_v, seed, max_turns=15):
    """Draw ``count`` valid episodes from ``pairs`` (with replacement if needed)."""
    rng = np.random.default_rng(seed)
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no interaction pairs to build episodes from")
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 1000:
            raise RuntimeError("could not sample enough valid episodes")
        pair = pairs[int(rng.integers(len(pairs)))]
        ep = sample_episode(catalog, pair, n_v, int(rng.integers(2**31)), max_turns)
        if ep is not None:
            out.append(ep)
    return out
