import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimcr.catalog import (
    CatalogParseError,
    CatalogValidationError,
    SynthSpec,
    largest_remainder,
    load_catalog,
    load_catalog_dir,
    make_catalog,
    save_catalog,
    split_interactions,
    synth_catalog,
)


def write(tmp_path, inter, ia, at):
    paths = []
    for name, body in (("i.tsv", inter), ("a.tsv", ia), ("t.tsv", at)):
        p = tmp_path / name
        p.write_text(body)
        paths.append(p)
    return paths


def test_load_small(tmp_path):
    cat = load_catalog(*write(tmp_path, "0\t1\n", "0\t0\n1\t1\n1\t2\n", "0\t0\n1\t1\n2\t1\n"))
    assert cat.num_items == 2
    assert cat.num_attr_instances == 3
    assert cat.num_attr_types == 2
    assert cat.item_attrs[1] == frozenset({1, 2})


def test_empty_interactions(tmp_path):
    cat = load_catalog(*write(tmp_path, "", "0\t0\n", "0\t0\n"))
    assert cat.interactions == ()


def test_dangling_instance(tmp_path):
    at = "".join(f"{p}\t0\n" for p in range(6))
    with pytest.raises(CatalogValidationError):
        load_catalog(*write(tmp_path, "", "0\t7\n", at))


@pytest.mark.parametrize("line", ["0\t1\t2\n", "0\tx\n", "3\n"])
def test_parse_errors_carry_line_number(tmp_path, line):
    with pytest.raises(CatalogParseError, match=":2:"):
        load_catalog(*write(tmp_path, "0\t0\n" + line, "0\t0\n", "0\t0\n"))


def test_duplicates_dropped():
    cat = make_catalog([{0}], [0], [(0, 0), (0, 0)])
    assert cat.interactions == ((0, 0),)
    assert cat.duplicates_dropped == 1


def test_largest_remainder_ten():
    assert largest_remainder(10, (0.7, 0.15, 0.15)) == [7, 2, 1]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 200), st.lists(st.integers(0, 10), min_size=3, max_size=3).filter(lambda r: sum(r) > 0))
def test_largest_remainder_properties(n, w):
    ratios = [x / sum(w) for x in w]
    counts = largest_remainder(n, ratios)
    assert sum(counts) == n
    for c, r in zip(counts, ratios):
        assert abs(c - n * r) < 1.0 + 1e-9


def one_user(n):
    return make_catalog([{0}] * n, [0], [(0, v) for v in range(n)])


def test_split_ten_interactions():
    s = split_interactions(one_user(10), seed=3)
    assert (len(s.train), len(s.valid), len(s.test)) in {(7, 1, 2), (7, 2, 1)}
    assert sorted(s.train + s.valid + s.test) == [(0, v) for v in range(10)]


def test_split_all_train():
    s = split_interactions(one_user(10), ratios=(1, 0, 0))
    assert len(s.train) == 10 and not s.valid and not s.test


def test_split_small_user_goes_to_train():
    s = split_interactions(one_user(2))
    assert len(s.train) == 2


def test_split_deterministic():
    cat = synth_catalog(SynthSpec(20, 40, 10, 3), seed=1)
    assert split_interactions(cat, seed=5) == split_interactions(cat, seed=5)


def test_split_bad_ratios():
    with pytest.raises(ValueError):
        split_interactions(one_user(5), ratios=(0.5, 0.5, 0.5))


def test_synth_desk_scale_valid(tmp_path):
    cat = synth_catalog(SynthSpec(200, 500, 60, 8), seed=0)
    assert (cat.num_users, cat.num_items, cat.num_attr_instances, cat.num_attr_types) == (200, 500, 60, 8)
    assert all(cat.item_attrs)
    assert set(cat.attr_type_of) == set(range(8))
    save_catalog(cat, tmp_path)
    assert load_catalog_dir(tmp_path) == cat


def test_synth_singleton_attrs():
    cat = synth_catalog(SynthSpec(5, 20, 6, 2, attrs_per_item=(1, 1)), seed=0)
    assert all(len(a) == 1 for a in cat.item_attrs)


def test_synth_byte_identical(tmp_path):
    spec = SynthSpec(30, 50, 12, 4)
    save_catalog(synth_catalog(spec, seed=9), tmp_path / "a")
    save_catalog(synth_catalog(spec, seed=9), tmp_path / "b")
    for name in ("interactions.tsv", "item_attrs.tsv", "attr_types.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_too_few_instances():
    with pytest.raises(ValueError):
        synth_catalog(SynthSpec(5, 5, 2, 3))


def test_synth_spec_missing_field():
    with pytest.raises(KeyError):
        SynthSpec.from_dict({"num_users": 1, "num_items": 1, "num_attr_instances": 1})
