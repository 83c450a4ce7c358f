"""Relation algebra checked against a naive pair-set oracle."""

import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from rvmcheck.relations import Rel, cross, find_cycle, idrel

ELEMS = list(range(8))

pairs_st = st.frozensets(
    st.tuples(st.sampled_from(ELEMS), st.sampled_from(ELEMS)), max_size=20)


def naive_seq(a, b):
    return {(x, z) for (x, y) in a for (y2, z) in b if y == y2}


def naive_plus(a):
    out = set(a)
    while True:
        new = out | naive_seq(out, out)
        if new == out:
            return out
        out = new


def naive_acyclic(a):
    closed = naive_plus(a)
    return not any(x == y for x, y in closed)


@given(pairs_st, pairs_st)
def test_seq_matches_oracle(a, b):
    assert Rel(a).seq(Rel(b)).pairs == naive_seq(a, b)


@given(pairs_st)
def test_plus_matches_oracle(a):
    assert Rel(a).plus().pairs == naive_plus(a)


@given(pairs_st)
@settings(max_examples=200)
def test_acyclic_matches_oracle(a):
    assert Rel(a).acyclic() == naive_acyclic(a)


@given(pairs_st)
def test_inverse_is_involutive(a):
    r = Rel(a)
    assert r.inv().inv() == r
    assert r.inv().pairs == {(b, x) for x, b in a}


@given(pairs_st, pairs_st)
def test_set_operations(a, b):
    assert (Rel(a) | Rel(b)).pairs == a | b
    assert (Rel(a) & Rel(b)).pairs == a & b
    assert (Rel(a) - Rel(b)).pairs == a - b


@given(pairs_st)
def test_restrict_filters_both_sides(a):
    dom = {0, 1, 2}
    rng = {2, 3, 4}
    got = Rel(a).restrict(dom, rng).pairs
    assert got == {(x, y) for x, y in a if x in dom and y in rng}
    assert Rel(a).restrict(dom).pairs == {(x, y) for x, y in a if x in dom}


@given(pairs_st)
def test_maybe_adds_identity_on_mentioned_elements(a):
    r = Rel(a).maybe()
    mentioned = {e for p in a for e in p}
    assert r.pairs == a | {(e, e) for e in mentioned}


def test_find_cycle_returns_an_actual_cycle():
    r = Rel([(0, 1), (1, 2), (2, 0), (3, 4)])
    cyc = find_cycle(r)
    assert cyc is not None
    n = len(cyc)
    for i in range(n):
        assert (cyc[i], cyc[(i + 1) % n]) in r


def test_find_cycle_none_on_dag():
    r = Rel([(0, 1), (0, 2), (1, 3), (2, 3)])
    assert find_cycle(r) is None
    assert r.acyclic()


def test_idrel_and_cross():
    assert idrel([1, 2]).pairs == {(1, 1), (2, 2)}
    assert cross([1, 2], [3]).pairs == {(1, 3), (2, 3)}


def test_domain_range():
    r = Rel([(1, 2), (3, 4)])
    assert r.domain() == frozenset({1, 3})
    assert r.range() == frozenset({2, 4})
