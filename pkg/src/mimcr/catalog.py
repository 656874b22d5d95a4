"""Static world model: users, items, attribute instances and their types.

Ids are dense 0-based integers within each entity class.  Catalogs are
loaded from three headerless TSV files::

    interactions.tsv   user_id <TAB> item_id
    item_attrs.tsv     item_id <TAB> attr_instance_id
    attr_types.tsv     attr_instance_id <TAB> attr_type_id
"""
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

INTERACTIONS_FILE = "interactions.tsv"
ITEM_ATTRS_FILE = "item_attrs.tsv"
ATTR_TYPES_FILE = "attr_types.tsv"


class CatalogParseError(ValueError):
    pass


class CatalogValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Catalog:
    num_users: int
    num_items: int
    num_attr_instances: int
    num_attr_types: int
    item_attrs: tuple  # item -> frozenset of attribute instances
    attr_type_of: tuple  # attribute instance -> attribute type
    interactions: tuple  # sorted unique (user, item) pairs
    duplicates_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        validate(self)

    @cached_property
    def items_with_attr(self):
        """attribute instance -> frozenset of items carrying it."""
        acc = [set() for _ in range(self.num_attr_instances)]
        for v, attrs in enumerate(self.item_attrs):
            for p in attrs:
                acc[p].add(v)
        return tuple(frozenset(s) for s in acc)

    @cached_property
    def instances_of_type(self):
        acc = [[] for _ in range(self.num_attr_types)]
        for p, c in enumerate(self.attr_type_of):
            acc[c].append(p)
        return tuple(tuple(x) for x in acc)

    @cached_property
    def user_items(self):
        acc = [[] for _ in range(self.num_users)]
        for u, v in self.interactions:
            acc[u].append(v)
        return tuple(tuple(x) for x in acc)

    @property
    def num_nodes(self):
        return self.num_users + self.num_items + self.num_attr_instances


def validate(c):
    if len(c.item_attrs) != c.num_items:
        raise CatalogValidationError(f"item_attrs has {len(c.item_attrs)} entries for {c.num_items} items")
    if len(c.attr_type_of) != c.num_attr_instances:
        raise CatalogValidationError(
            f"attr_type_of has {len(c.attr_type_of)} entries for {c.num_attr_instances} instances"
        )
    for v, attrs in enumerate(c.item_attrs):
        for p in attrs:
            if not 0 <= p < c.num_attr_instances:
                raise CatalogValidationError(f"item {v} references undefined attribute instance {p}")
    for p, t in enumerate(c.attr_type_of):
        if not 0 <= t < c.num_attr_types:
            raise CatalogValidationError(f"instance {p} has out-of-range type {t}")
    for u, v in c.interactions:
        if not (0 <= u < c.num_users and 0 <= v < c.num_items):
            raise CatalogValidationError(f"interaction ({u}, {v}) out of range")


def make_catalog(item_attrs, attr_type_of, interactions, num_users=None, num_items=None,
                 num_attr_types=None):
    """Build a Catalog from plain python containers, deduplicating interactions."""
    item_attrs = tuple(frozenset(int(p) for p in a) for a in item_attrs)
    attr_type_of = tuple(int(t) for t in attr_type_of)
    pairs = [(int(u), int(v)) for u, v in interactions]
    unique = sorted(set(pairs))
    if num_users is None:
        num_users = max((u for u, _ in unique), default=-1) + 1
    if num_items is None:
        num_items = len(item_attrs)
    if num_attr_types is None:
        num_attr_types = max(attr_type_of, default=-1) + 1
    return Catalog(
        num_users=num_users,
        num_items=num_items,
        num_attr_instances=len(attr_type_of),
        num_attr_types=num_attr_types,
        item_attrs=item_attrs,
        attr_type_of=attr_type_of,
        interactions=tuple(unique),
        duplicates_dropped=len(pairs) - len(unique),
    )


def _read_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise CatalogParseError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
            try:
                a, b = int(cols[0]), int(cols[1])
            except ValueError:
                raise CatalogParseError(f"{path}:{lineno}: non-integer field") from None
            if a < 0 or b < 0:
                raise CatalogParseError(f"{path}:{lineno}: negative id")
            pairs.append((a, b))
    return pairs


def load_catalog(interactions_path, item_attrs_path, attr_types_path):
    inter = _read_pairs(interactions_path)
    ia = _read_pairs(item_attrs_path)
    at = _read_pairs(attr_types_path)

    num_inst = max((p for p, _ in at), default=-1) + 1
    types = [-1] * num_inst
    for p, t in at:
        types[p] = t
    if -1 in types:
        raise CatalogValidationError(f"attribute instance {types.index(-1)} has no type")
    for v, p in ia:
        if p >= num_inst:
            raise CatalogValidationError(f"item {v} references undefined attribute instance {p}")

    num_items = max(max((v for v, _ in ia), default=-1), max((v for _, v in inter), default=-1)) + 1
    attrs = [set() for _ in range(num_items)]
    for v, p in ia:
        attrs[v].add(p)
    cat = make_catalog(attrs, types, inter)
    if cat.duplicates_dropped:
        log.info("dropped %d duplicate interactions from %s", cat.duplicates_dropped, interactions_path)
    return cat


def load_catalog_dir(path):
    return load_catalog(
        os.path.join(path, INTERACTIONS_FILE),
        os.path.join(path, ITEM_ATTRS_FILE),
        os.path.join(path, ATTR_TYPES_FILE),
    )


def save_catalog(catalog, path):
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, INTERACTIONS_FILE), "w", encoding="utf-8", newline="\n") as f:
        f.writelines(f"{u}\t{v}\n" for u, v in catalog.interactions)
    with open(os.path.join(path, ITEM_ATTRS_FILE), "w", encoding="utf-8", newline="\n") as f:
        for v, attrs in enumerate(catalog.item_attrs):
            f.writelines(f"{v}\t{p}\n" for p in sorted(attrs))
    with open(os.path.join(path, ATTR_TYPES_FILE), "w", encoding="utf-8", newline="\n") as f:
        f.writelines(f"{p}\t{t}\n" for p, t in enumerate(catalog.attr_type_of))


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class Split:
    train: tuple
    valid: tuple
    test: tuple


def largest_remainder(n, ratios):
    """Integer counts summing to ``n``, proportional to ``ratios``.

    Leftover units go to the largest fractional parts; ties favour the
    earlier ratio.
    """
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x + 1e-9)) for x in raw]
    rest = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def split_interactions(catalog, ratios=(0.7, 0.15, 0.15), seed=0):
    """Per-user shuffled train/valid/test split.

    Users with fewer than three interactions keep everything in train.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    train, valid, test = [], [], []
    for u, items in enumerate(catalog.user_items):
        if not items:
            continue
        pairs = [(u, v) for v in items]
        if len(pairs) < 3:
            train.extend(pairs)
            continue
        order = rng.permutation(len(pairs))
        n_tr, n_va, _ = largest_remainder(len(pairs), ratios)
        shuffled = [pairs[i] for i in order]
        train.extend(shuffled[:n_tr])
        valid.extend(shuffled[n_tr:n_tr + n_va])
        test.extend(shuffled[n_tr + n_va:])
    return Split(tuple(sorted(train)), tuple(sorted(valid)), tuple(sorted(test)))


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class SynthSpec:
    num_users: int
    num_items: int
    num_attr_instances: int
    num_attr_types: int
    attrs_per_item: tuple = (3, 6)
    interactions_per_user: tuple = (5, 15)
    attr_skew: float = 1.0
    pref_size: int = 3
    pref_strength: float = 2.0

    @classmethod
    def from_dict(cls, d):
        required = ["num_users", "num_items", "num_attr_instances", "num_attr_types"]
        missing = [k for k in required if k not in d]
        if missing:
            raise KeyError(f"synth spec missing field {missing[0]!r}")
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        for k in ("attrs_per_item", "interactions_per_user"):
            if k in known:
                known[k] = tuple(known[k])
        return cls(**known)


def synth_catalog(spec, seed=0):
    """Seeded synthetic catalog with latent user taste over attribute instances.

    Instance popularity among items follows a Zipf-like law (``attr_skew``);
    each user prefers ``pref_size`` instances and picks items with odds
    ``exp(pref_strength * overlap)``.
    """
    s = spec
    for k in ("num_users", "num_items", "num_attr_instances", "num_attr_types"):
        if getattr(s, k) < 1:
            raise ValueError(f"{k} must be >= 1")
    if s.num_attr_instances < s.num_attr_types:
        raise ValueError("need at least as many attribute instances as types")
    lo, hi = s.attrs_per_item
    if not 1 <= lo <= hi:
        raise ValueError(f"bad attrs_per_item range {s.attrs_per_item}")
    ilo, ihi = s.interactions_per_user
    if not 1 <= ilo <= ihi:
        raise ValueError(f"bad interactions_per_user range {s.interactions_per_user}")
    rng = np.random.default_rng(seed)

    # every type gets at least one instance, the rest uniformly
    types = np.concatenate([
        np.arange(s.num_attr_types),
        rng.integers(0, s.num_attr_types, size=s.num_attr_instances - s.num_attr_types),
    ])
    types = types[rng.permutation(s.num_attr_instances)]

    popularity = 1.0 / np.arange(1, s.num_attr_instances + 1) ** s.attr_skew
    popularity = popularity[rng.permutation(s.num_attr_instances)]
    popularity /= popularity.sum()
    hi = min(hi, s.num_attr_instances)
    lo = min(lo, hi)
    item_attrs = []
    for _ in range(s.num_items):
        k = int(rng.integers(lo, hi + 1))
        item_attrs.append(set(rng.choice(s.num_attr_instances, size=k, replace=False, p=popularity).tolist()))

    membership = np.zeros((s.num_items, s.num_attr_instances))
    for v, attrs in enumerate(item_attrs):
        membership[v, list(attrs)] = 1.0
    interactions = []
    ihi = min(ihi, s.num_items)
    ilo = min(ilo, ihi)
    for u in range(s.num_users):
        pref = rng.choice(s.num_attr_instances, size=min(s.pref_size, s.num_attr_instances),
                          replace=False, p=popularity)
        logits = s.pref_strength * membership[:, pref].sum(axis=1)
        w = np.exp(logits - logits.max())
        w /= w.sum()
        n = int(rng.integers(ilo, ihi + 1))
        for v in rng.choice(s.num_items, size=n, replace=False, p=w):
            interactions.append((u, int(v)))

    return make_catalog(item_attrs, types.tolist(), interactions, num_users=s.num_users,
                        num_attr_types=s.num_attr_types)
