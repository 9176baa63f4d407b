from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scchain.errors import ConstructionUnsupported, InvalidParameters
from scchain.protographs import (
    Protograph,
    build_regular_chain,
    build_sc_arja,
    build_sc_ra,
    degree_profile,
    degrees_by_position,
    design_rate,
    from_text,
    to_text,
)


def regular_rate(L):
    return 1 - Fraction(L + 2, 2 * L)


def ra_rate(q, L):
    return 1 - Fraction(L + q - 1, 2 * L + q - 1)


def arja_rate(L):
    return 1 - Fraction(L + 1, 2 * L)


class TestRegularChain:
    def test_l4_profile(self):
        p = build_regular_chain(3, 6, 4)
        assert p.n_vars == 8 and p.n_checks == 6
        var_deg, chk_deg = degree_profile(p)
        assert chk_deg == [2, 4, 6, 6, 4, 2]
        assert set(var_deg) == {3}

    def test_l3_edge_count(self):
        p = build_regular_chain(3, 6, 3)
        assert (p.n_vars, p.n_checks) == (6, 5)
        assert p.n_edges == 18
        assert sum(degree_profile(p)[0]) == sum(degree_profile(p)[1]) == 18

    def test_l50_rate(self):
        assert design_rate(build_regular_chain(3, 6, 50)) == Fraction(12, 25)

    def test_rate_tends_to_half(self):
        rates = [design_rate(build_regular_chain(3, 6, L)) for L in (10, 100, 1000)]
        assert all(a < b < Fraction(1, 2) for a, b in zip(rates, rates[1:]))
        assert Fraction(1, 2) - rates[-1] < Fraction(1, 500)

    def test_spreading_over_three_positions(self):
        p = build_regular_chain(3, 6, 7)
        for v in range(p.n_vars):
            checks = np.flatnonzero(p.base[:, v])
            assert sorted(p.chk_position[checks] - p.var_position[v]) == [0, 1, 2]

    def test_unsupported_pair(self):
        with pytest.raises(ConstructionUnsupported):
            build_regular_chain(3, 5, 10)

    def test_other_multiple_pairs(self):
        p = build_regular_chain(4, 8, 10)
        assert set(p.var_degree) == {4} and p.chk_degree.max() == 8
        assert design_rate(p) == 1 - Fraction(10 + 3, 2 * 10)

    def test_short_chain_rejected(self):
        with pytest.raises(InvalidParameters):
            build_regular_chain(3, 6, 2)

    @given(st.integers(3, 120))
    def test_profile_symmetric(self, L):
        chk = degree_profile(build_regular_chain(3, 6, L))[1]
        assert chk == chk[::-1]


class TestRA:
    def test_rates(self):
        assert design_rate(build_sc_ra(6, 50)) == 1 - Fraction(55, 105)
        assert design_rate(build_sc_ra(4, 50)) == 1 - Fraction(53, 103)

    def test_node_counts_and_degrees(self):
        q, L = 6, 50
        p = build_sc_ra(q, L)
        kinds = np.array(p.var_kind)
        deg = p.var_degree
        assert (kinds == "rep").sum() == L
        assert (kinds == "acc").sum() == L + q - 1
        assert set(deg[kinds == "rep"]) == {q}
        assert set(deg[kinds == "acc"]) == {2}
        assert p.n_checks == L + q - 1
        assert p.a == q - 1 and p.v_unc == 2

    def test_repetition_spreading(self):
        p = build_sc_ra(5, 12)
        for v in np.flatnonzero(np.array(p.var_kind) == "rep"):
            pos = p.chk_position[np.flatnonzero(p.base[:, v])]
            assert sorted(pos - p.var_position[v]) == list(range(5))

    @given(st.integers(3, 8), st.integers(0, 60))
    def test_no_degree_one_check(self, q, extra):
        p = build_sc_ra(q, q + extra)
        assert p.chk_degree.min() >= 2

    def test_q_too_small(self):
        with pytest.raises(InvalidParameters):
            build_sc_ra(2, 10)

    def test_modified_removes_four_accumulators(self):
        plain, mod = build_sc_ra(6, 20), build_sc_ra(6, 20, modified=True)
        n_acc = lambda p: sum(k == "acc" for k in p.var_kind)
        assert n_acc(plain) - n_acc(mod) == 4
        assert design_rate(mod) < design_rate(plain)


class TestARJA:
    def test_rate_l50(self):
        assert design_rate(build_sc_arja(50)) == 1 - Fraction(51, 100)

    def test_one_punctured_node_per_position(self):
        p = build_sc_arja(4)
        assert p.punctured.sum() == 4
        assert sorted(p.var_position[p.punctured]) == [1, 2, 3, 4]

    def test_modified_lower_rate(self):
        for L in (8, 20, 50):
            assert design_rate(build_sc_arja(L, modified=True)) < design_rate(build_sc_arja(L))


class TestDesignRate:
    def test_square_protograph_rate_zero(self):
        p = from_text("2 2\n1 1\n1 1\n")
        assert design_rate(p) == 0

    @given(st.integers(3, 200))
    @settings(max_examples=60)
    def test_table_formulas(self, L):
        assert design_rate(build_regular_chain(3, 6, L)) == regular_rate(L)
        for q in (4, 5, 6):
            assert design_rate(build_sc_ra(q, L)) == ra_rate(q, L)
        assert design_rate(build_sc_arja(L)) == arja_rate(L)


def test_degree_profile_empty():
    p = from_text("0 0\n")
    assert degree_profile(p) == ([], [])


def test_degrees_by_position_matches_fig_profile():
    prof = degrees_by_position(build_regular_chain(3, 6, 4))
    assert [prof[i][1] for i in range(1, 7)] == [[2], [4], [6], [6], [4], [2]]
    assert prof[5][0] == [] and prof[1][0] == [3, 3]


@pytest.mark.parametrize("p", [
    build_regular_chain(3, 6, 5),
    build_sc_ra(4, 7),
    build_sc_ra(6, 10, modified=True),
    build_sc_arja(6),
    build_sc_arja(9, modified=True),
])
def test_text_round_trip(p):
    text = to_text(p)
    q = from_text(text)
    assert q.same_as(p)
    assert to_text(q) == text


def test_text_rejects_negative_entry():
    with pytest.raises(InvalidParameters):
        from_text("1 2\n1 -1\n")


def test_all_zero_column_rejected():
    with pytest.raises(InvalidParameters):
        Protograph(
            base=np.array([[1, 0]]), var_position=np.array([1, 1]), chk_position=np.array([1]),
            punctured=np.zeros(2, bool), var_layer=np.ones(2, int), chk_layer=np.ones(1, int),
            var_chain=np.zeros(2, int), chk_chain=np.zeros(1, int),
        )


@given(st.sampled_from(["regular", "ra", "arja"]), st.integers(3, 40))
@settings(max_examples=40)
def test_handshake(family, L):
    p = {"regular": lambda: build_regular_chain(3, 6, L),
         "ra": lambda: build_sc_ra(4, L),
         "arja": lambda: build_sc_arja(L)}[family]()
    v, c = degree_profile(p)
    assert sum(v) == sum(c) == p.n_edges
