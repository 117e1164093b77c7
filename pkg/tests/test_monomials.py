import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from tripolar import gf2
from tripolar.monomials import (
    Monomial,
    MonomialSet,
    channel_index_of_monomial,
    complement,
    decreasing_closure,
    dual_set,
    evaluate,
    evaluation_matrix,
    is_decreasing,
    maximal_elements,
    monomial_from_channel_index,
    product,
    strong_leq,
    weak_leq,
)


def M(vars_, n):
    return Monomial.from_variables(vars_, n)


def S(n, *monos):
    return MonomialSet(n, [M(v, n).mask for v in monos])


# channel index map -------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 6])
def test_last_channel_is_monomial_one(n):
    assert monomial_from_channel_index((1 << n) - 1, n) == Monomial.one(n)


def test_channel_index_examples():
    assert monomial_from_channel_index(0, 3) == M([0, 1, 2], 3)
    assert monomial_from_channel_index(5, 3) == M([1], 3)
    assert str(monomial_from_channel_index(5, 3)) == "x1"


@pytest.mark.parametrize("n", [0, 1, 4, 7])
def test_channel_index_bijection(n):
    seen = {monomial_from_channel_index(a, n) for a in range(1 << n)}
    assert len(seen) == 1 << n
    for a in range(1 << n):
        assert channel_index_of_monomial(monomial_from_channel_index(a, n)) == a


@pytest.mark.parametrize("a", [-1, 8, 100])
def test_channel_index_out_of_range(a):
    with pytest.raises(ValueError):
        monomial_from_channel_index(a, 3)


def test_monomial_validation():
    with pytest.raises(ValueError):
        Monomial(8, 3)
    with pytest.raises(ValueError):
        Monomial(0, 25)
    assert Monomial.full(3).degree == 3
    assert str(Monomial.one(4)) == "1"


# orders -------------------------------------------------------------------------

def test_strong_order_examples():
    assert strong_leq(M([0, 1], 3), M([0, 2], 3))
    assert strong_leq(M([1], 3), M([0, 1], 3))
    assert not strong_leq(M([2], 3), M([0, 1], 3))


def test_weak_order_examples():
    assert weak_leq(M([0], 2), M([0, 1], 2))
    assert not weak_leq(M([1], 2), M([0], 2))
    for g in range(4):
        assert weak_leq(Monomial.one(2), Monomial(g, 2))


def test_mismatched_rings_rejected():
    with pytest.raises(ValueError):
        strong_leq(Monomial(1, 2), Monomial(1, 3))
    with pytest.raises(ValueError):
        product(Monomial(1, 2), Monomial(1, 3))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_strong_order_matches_definition(n):
    for f, g in itertools.product(range(1 << n), repeat=2):
        assert strong_leq(Monomial(f, n), Monomial(g, n)) == O.strong_leq_definition(f, g, n)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_order_axioms_exhaustive(n):
    N = 1 << n
    leq = np.array([[strong_leq(Monomial(f, n), Monomial(g, n)) for g in range(N)]
                    for f in range(N)])
    assert leq.diagonal().all()
    assert not (leq & leq.T & ~np.eye(N, dtype=bool)).any()
    # transitivity: leq∘leq ⊆ leq
    comp = (leq.astype(int) @ leq.astype(int)) > 0
    assert not (comp & ~leq).any()


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_weak_implies_strong(n):
    for f, g in itertools.product(range(1 << n), repeat=2):
        if weak_leq(Monomial(f, n), Monomial(g, n)):
            assert strong_leq(Monomial(f, n), Monomial(g, n))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_complement_is_antitone(n):
    for f, g in itertools.product(range(1 << n), repeat=2):
        F, G = Monomial(f, n), Monomial(g, n)
        assert strong_leq(F, G) == strong_leq(complement(G), complement(F))


@given(st.integers(1, 24).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
def test_complement_involution(nm):
    n, m = nm
    mono = Monomial(m, n)
    assert complement(complement(mono)) == mono
    assert product(mono, complement(mono)) == Monomial.full(n)


# products and evaluation --------------------------------------------------------

def test_product_examples():
    assert product(M([0], 2), M([0], 2)) == M([0], 2)
    assert product(M([0], 2), M([1], 2)) == M([0, 1], 2)
    assert complement(M([0], 2)) == M([1], 2)
    assert complement(Monomial.one(3)) == M([0, 1, 2], 3)


def test_evaluate_examples():
    np.testing.assert_array_equal(evaluate(Monomial.one(2)), [1, 1, 1, 1])
    np.testing.assert_array_equal(evaluate(M([0], 2)), [0, 1, 0, 1])
    np.testing.assert_array_equal(evaluate(M([0, 1], 2)), [0, 0, 0, 1])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_evaluation_matches_oracle_and_weight(n):
    for m in range(1 << n):
        v = evaluate(Monomial(m, n))
        np.testing.assert_array_equal(v, O.ev(m, n))
        assert v.sum() == 2 ** (n - bin(m).count("1"))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_evaluation_product_homomorphism(n):
    for f, g in itertools.product(range(1 << n), repeat=2):
        F, G = Monomial(f, n), Monomial(g, n)
        np.testing.assert_array_equal(evaluate(F) & evaluate(G), evaluate(product(F, G)))


@given(st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(0, (1 << n) - 1)))))
def test_evaluation_vectors_independent(ns):
    n, masks = ns
    rows = evaluation_matrix(sorted(masks), n)
    assert O.gf2_rank(list(rows)) == len(masks)


# decreasing sets ------------------------------------------------------------------

def test_closure_examples():
    assert decreasing_closure(S(2, [0, 1])) == S(2, [], [0], [1], [0, 1])
    assert decreasing_closure(S(2, [1])) == S(2, [], [0], [1])
    assert decreasing_closure(S(2, [1])) == MonomialSet(2, O.closure_bruteforce({2}, 2))


def test_is_decreasing_examples():
    assert is_decreasing(S(2, [], [0]))
    assert not is_decreasing(S(2, [0, 1]))
    assert is_decreasing(MonomialSet.full(5))
    s = S(3, [], [0])
    assert not s.decreasing_verified
    assert is_decreasing(s) and s.decreasing_verified


@given(st.integers(1, 5).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(0, (1 << n) - 1), max_size=6))))
def test_closure_matches_bruteforce(ns):
    n, masks = ns
    cl = decreasing_closure(MonomialSet(n, masks))
    assert set(int(m) for m in cl.masks) == O.closure_bruteforce(masks, n)
    assert is_decreasing(MonomialSet(n, cl.masks))
    assert decreasing_closure(cl) == cl


@given(st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(0, (1 << n) - 1)))))
def test_is_decreasing_matches_bruteforce(ns):
    n, masks = ns
    assert is_decreasing(MonomialSet(n, masks)) == O.is_decreasing_bruteforce(masks, n)


def test_dual_set_examples():
    assert dual_set(S(2, [], [0], [1])) == S(2, [])
    assert dual_set(MonomialSet.full(3)) == MonomialSet.empty(3)
    assert dual_set(S(2, [])) == S(2, [], [0], [1])
    with pytest.raises(ValueError):
        dual_set(S(2, [0, 1]))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dual_set_is_gf2_nullspace(n):
    for I in O.all_decreasing_sets(n):
        D = dual_set(MonomialSet(n, I))
        assert set(int(m) for m in D.masks) == O.dual_bruteforce(I, n)
        assert len(D) == (1 << n) - len(I)
        assert is_decreasing(MonomialSet(n, D.masks))
        if I:
            gen = gf2.BitMatrix.from_bits(evaluation_matrix(sorted(I), n))
            null = gf2.nullspace(gen)
        else:
            null = gf2.BitMatrix.identity(1 << n)
        if len(D):
            dgen = gf2.BitMatrix.from_bits(evaluation_matrix(D.masks, n))
            assert gf2.rowspace_equal(null, dgen)
        else:
            assert null.nrows == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_dual_is_involution(n):
    for I in O.all_decreasing_sets(n):
        s = MonomialSet(n, I)
        assert dual_set(dual_set(s)) == s


def test_maximal_examples():
    assert maximal_elements(S(2, [], [0], [1], [0, 1])) == S(2, [0, 1])
    anti = S(3, [0, 1], [2])
    assert maximal_elements(anti) == anti
    assert maximal_elements(S(3, [], [0], [1])) == S(3, [1])
    assert len(maximal_elements(MonomialSet.empty(3))) == 0


@given(st.integers(1, 5).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(0, (1 << n) - 1), max_size=8))))
def test_maximal_elements_cover_set(ns):
    n, masks = ns
    for s in (MonomialSet(n, masks), decreasing_closure(MonomialSet(n, masks))):
        mx = [int(m) for m in maximal_elements(s).masks]
        ms = [int(m) for m in s.masks]
        expected = [g for g in ms if not any(h != g and O.strong_leq_definition(g, h, n)
                                             for h in ms)]
        assert sorted(mx) == sorted(expected)
        wk = [int(m) for m in maximal_elements(s, order="weak").masks]
        assert sorted(wk) == sorted(g for g in ms if not any(h != g and g & h == g for h in ms))


def test_monomial_set_json_roundtrip():
    s = S(4, [], [0], [1], [0, 1])
    t = MonomialSet.from_json(s.to_json())
    assert t == s and hash(t) == hash(s)
    assert json.loads(s.to_json()) == {"n": 4, "masks": [0, 1, 2, 3]}


def test_monomial_set_is_immutable():
    s = MonomialSet.full(2)
    with pytest.raises(AttributeError):
        s.n = 3
    with pytest.raises(ValueError):
        s.masks[0] = 5
    assert M([0], 2) in s and 3 in s and Monomial(0, 3) not in s
    np.testing.assert_array_equal(S(2, [0], [0, 1]).channel_indices(), [0, 2])
