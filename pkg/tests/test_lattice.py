import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measure_filter.lattice import (
    DownSetTooLarge,
    MultiplicityVector,
    Partition,
    binom_pmf,
    down_set,
    down_set_array,
    down_set_size,
    down_set_union,
    hypergeom_pmf,
    leq,
    mv,
    project,
    t_update,
)

small_vectors = st.lists(st.integers(0, 4), min_size=1, max_size=4).map(
    lambda xs: MultiplicityVector.from_dense(xs)
)


def test_canonical_form_ignores_padding():
    assert mv(2, 1) == mv(2, 1, 0, 0)
    assert hash(mv(2, 1)) == hash(MultiplicityVector.from_counts({1: 1, 0: 2, 5: 0}))
    assert mv(2, 1).total == 3
    assert mv().total == 0


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        MultiplicityVector.from_counts({0: -1})


@pytest.mark.parametrize("a, b, expected", [
    ((1, 0), (2, 1), True),
    ((2, 0), (1, 1), False),
    ((2, 1), (2, 1), True),
])
def test_leq(a, b, expected):
    assert leq(mv(*a), mv(*b)) is expected


def test_down_set_examples():
    got = set(down_set(mv(2, 1)))
    want = {mv(0, 0), mv(1, 0), mv(2, 0), mv(0, 1), mv(1, 1), mv(2, 1)}
    assert got == want
    assert down_set(mv(0)) == [mv()]
    assert len(down_set(mv(1, 1, 1))) == 8


def test_down_set_union_examples():
    assert set(down_set_union([mv(1, 0), mv(0, 1)])) == {mv(0, 0), mv(1, 0), mv(0, 1)}
    assert down_set_union([mv(0, 0)]) == [mv()]
    assert set(down_set_union([mv(2, 1)])) == set(down_set(mv(2, 1)))


def test_down_set_union_is_sorted_lexicographically():
    out = down_set_union([mv(1, 2), mv(2, 0)])
    dense = [tuple(v.to_dense(2)) for v in out]
    assert dense == sorted(dense)


def test_down_set_cap():
    with pytest.raises(DownSetTooLarge):
        down_set(mv(9, 9, 9), cap=100)


@given(small_vectors)
def test_down_set_size_and_closure(m):
    ds = down_set(m)
    assert len(ds) == down_set_size(m) == math.prod(c + 1 for c in m.counts.values())
    members = set(ds)
    for n in ds:
        assert leq(n, m)
        assert set(down_set(n)) <= members


@given(small_vectors)
def test_down_set_array_matches_sparse(m):
    K = max(m.dim, 1)
    rows = {tuple(r) for r in down_set_array(m.to_dense(K))}
    assert rows == {tuple(n.to_dense(K)) for n in down_set(m)}


@pytest.mark.parametrize("m, cells, expected", [
    ((2, 1), [[0, 1]], (3,)),
    ((2, 1), [[0], [1]], (2, 1)),
    ((1, 2, 3), [[0, 1], [2]], (3, 3)),
])
def test_project_examples(m, cells, expected):
    assert project(mv(*m), Partition.from_cells(cells)) == mv(*expected)


def test_hypergeom_examples():
    assert hypergeom_pmf(mv(1, 1), mv(2, 1)) == pytest.approx(2 / 3, abs=1e-15)
    assert hypergeom_pmf(mv(2, 1), mv(2, 1)) == pytest.approx(1.0, abs=1e-15)
    assert hypergeom_pmf(mv(), mv(2, 1)) == pytest.approx(1.0, abs=1e-15)


@given(small_vectors)
def test_hypergeom_levels_sum_to_one(m):
    sums = {}
    for i in down_set(m):
        sums[i.total] = sums.get(i.total, 0.0) + hypergeom_pmf(i, m)
    for v in sums.values():
        assert abs(v - 1.0) < 1e-12


def _hypergeom_fraction(i, m):
    num = math.prod(math.comb(c, i[j]) for j, c in m.items)
    return Fraction(num, math.comb(m.total, i.total))


@settings(max_examples=50)
@given(small_vectors, st.data())
def test_hypergeom_log_path_matches_exact_integers(m, data):
    i = data.draw(st.sampled_from(down_set(m)))
    exact = float(_hypergeom_fraction(i, m))
    assert hypergeom_pmf(i, m) == pytest.approx(exact, rel=1e-12)
    assert hypergeom_pmf(i, m, exact=True) == exact


@settings(max_examples=50)
@given(small_vectors, st.data())
def test_hypergeom_merging(m, data):
    K = max(m.dim, 1)
    labels = data.draw(st.lists(st.integers(0, K - 1), min_size=K, max_size=K))
    used = sorted(set(labels))
    part = Partition({a: used.index(c) for a, c in enumerate(labels)}, len(used))
    merged = {}
    for i in down_set(m):
        key = project(i, part)
        merged[key] = merged.get(key, 0.0) + hypergeom_pmf(i, m)
    pm = project(m, part)
    for j, v in merged.items():
        assert abs(v - hypergeom_pmf(j, pm)) < 1e-12


def test_binom_examples():
    assert binom_pmf(0, 5, 0.3) == pytest.approx(0.7**5, rel=1e-14)
    assert binom_pmf(1, 3, 1 / 3) == pytest.approx(4 / 9, rel=1e-14)
    assert binom_pmf(4, 4, 1.0) == 1.0
    assert binom_pmf(2, 7, 0.4) == pytest.approx(binom_pmf(2, 7, 0.4, exact=True), rel=1e-13)


def test_t_update_examples():
    assert t_update(mv(0, 0, 1), mv(2, 1)) == mv(2, 1, 1)
    assert t_update(mv(), mv(2, 1)) == mv(2, 1)
    assert t_update(mv(2), mv(2, 1)) == mv(4, 1)


@given(small_vectors, small_vectors)
def test_project_commutes_with_t_update(m, obs):
    K = max(m.dim, obs.dim, 1)
    part = Partition({a: a % 2 for a in range(K)}, 2)
    assert project(t_update(obs, m), part) == t_update(project(obs, part), project(m, part))
    assert project(m, part).total == m.total


def test_subtraction_checks_order():
    assert mv(2, 1) - mv(1, 1) == mv(1)
    with pytest.raises(ValueError):
        mv(1) - mv(2)
