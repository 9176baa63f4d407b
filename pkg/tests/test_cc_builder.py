import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scchain.cc_builder import (
    CCSpec,
    ConnectionEdge,
    EnsembleSpec,
    arja_merge_plan,
    build_cc_arja,
    build_cc_ra,
    build_cc_regular,
    build_cc_regular_variant,
    build_cc_tree,
    build_custom,
    load_spec,
    protected_ratio,
    save_spec,
    spec_from_dict,
    spec_to_dict,
)
from scchain.errors import ConstructionUnsupported, InvalidParameters, InvalidSpec
from scchain.protographs import (
    build_regular_chain,
    build_sc_arja,
    build_sc_ra,
    degree_profile,
    degrees_by_position,
    design_rate,
)


def chain_var_degrees(p, layer, chain=0):
    prof = degrees_by_position(p, layer=layer, chain=chain)
    return {pos: v for pos, (v, _) in prof.items() if v}


class TestRegularCC:
    def test_upper_chain_degrees(self):
        L, h = 50, 25
        p = build_cc_regular(L, 2)
        deg = chain_var_degrees(p, 1)
        assert [deg[i] for i in range(h, h + 4)] == [[4, 4], [5, 5], [5, 5], [4, 4]]
        assert all(deg[i] == [3, 3] for i in deg if not h <= i < h + 4)

    def test_lower_chain_unchanged_and_saturated(self):
        p = build_cc_regular(50, 2)
        deg = chain_var_degrees(p, 2)
        assert all(d == [3, 3] for d in deg.values())
        chk = p.chk_degree[p.chk_layer == 2]
        assert set(chk.tolist()) == {6}

    def test_last_layer_matches_component(self):
        p = build_cc_regular(20, 3)
        single = degrees_by_position(build_regular_chain(3, 6, 20))
        assert {k: v[0] for k, v in single.items() if v[0]} == chain_var_degrees(p, 3)

    def test_edge_count(self):
        # the 12 connection edges fill sockets left empty by the lower chain's
        # terminations, so the node counts (and the rate) are unchanged while
        # both sides of the graph gain 12 edge ends
        single = build_regular_chain(3, 6, 50)
        p = build_cc_regular(50, 2)
        assert p.n_edges == 2 * single.n_edges + 12
        assert (p.n_vars, p.n_checks) == (2 * single.n_vars, 2 * single.n_checks)

    def test_t1_is_single_chain(self):
        assert build_cc_regular(50, 1).same_as(build_regular_chain(3, 6, 50))

    def test_too_short(self):
        with pytest.raises(InvalidParameters):
            build_cc_regular(7, 2)

    @given(st.integers(8, 80), st.integers(1, 4))
    @settings(max_examples=30, deadline=None)
    def test_rate_neutral_and_handshake(self, L, T):
        p = build_cc_regular(L, T)
        assert design_rate(p) == design_rate(build_regular_chain(3, 6, L))
        v, c = degree_profile(p)
        assert sum(v) == sum(c)

    def test_default_variant_is_four_pos(self):
        assert build_cc_regular_variant(50, 2, "four_pos_45").same_as(build_cc_regular(50, 2))

    @pytest.mark.parametrize("pattern", ["six_pos_deg4", "two_pos_deg6"])
    def test_variants_use_same_budget(self, pattern):
        p = build_cc_regular_variant(30, 2, pattern)
        base = build_regular_chain(3, 6, 30)
        upper = p.var_degree[p.var_layer == 1]
        assert upper.sum() - base.var_degree.sum() == 12
        assert p.chk_degree.max() == 6

    def test_unknown_pattern(self):
        with pytest.raises(InvalidParameters):
            build_cc_regular_variant(30, 2, "zigzag")


class TestTree:
    def test_chain_counts(self):
        p = build_cc_tree(20, 3)
        pairs = set(zip(p.var_layer.tolist(), p.var_chain.tolist()))
        counts = [len({c for l, c in pairs if l == j}) for j in (1, 2, 3)]
        assert counts == [1, 2, 4]

    def test_each_upper_chain_has_two_regions(self):
        p = build_cc_tree(24, 2)
        deg = chain_var_degrees(p, 1)
        boosted = sorted(i for i, d in deg.items() if max(d) > 3)
        assert len(boosted) == 8
        gaps = np.diff(boosted)
        assert (gaps > 1).sum() == 1

    def test_too_short(self):
        with pytest.raises(InvalidParameters):
            build_cc_tree(11, 2)

    @pytest.mark.parametrize("T,expected", [(1, Fraction(0)), (2, Fraction(1, 3)), (3, Fraction(3, 7))])
    def test_protected_ratio(self, T, expected):
        assert protected_ratio(T) == expected

    def test_protected_ratio_limit(self):
        assert abs(protected_ratio(20) - Fraction(1, 2)) < Fraction(1, 10**5)

    @given(st.integers(1, 40))
    def test_protected_ratio_closed_form(self, T):
        num = sum(2 ** (j - 1) for j in range(1, T))
        den = sum(2 ** (j - 1) for j in range(1, T + 1))
        assert protected_ratio(T) == Fraction(num, den)


class TestRA:
    def test_two_per_layer_degree_18(self):
        p = build_cc_ra(6, 50, 3)
        rep = np.array(p.var_kind) == "rep"
        for j in (1, 2):
            deg = p.var_degree[(p.var_layer == j) & rep]
            assert sorted(set(deg.tolist())) == [6, 18]
            per_chain = (deg == 18).sum() / len(set(p.var_chain[p.var_layer == j].tolist()))
            assert per_chain == 5
        assert p.chk_degree.max() <= 8

    def test_modified_single_uses_eight_edges(self):
        p = build_cc_ra(6, 50, 2, "modified_single")
        upper = p.var_degree[p.var_layer == 1].sum()
        assert upper - build_sc_ra(6, 50).var_degree.sum() == 8
        assert p.chk_degree.max() <= 8

    def test_t1_matches_chain(self):
        assert build_cc_ra(6, 20, 1).same_as(build_sc_ra(6, 20))

    def test_only_q6(self):
        with pytest.raises(ConstructionUnsupported):
            build_cc_ra(5, 50, 2)


class TestARJA:
    def test_merged_degrees(self):
        p = build_cc_arja(50, 2)
        degree = {}
        for v in np.flatnonzero((p.var_layer == 1) & (p.var_chain == 0)):
            degree[(int(p.var_position[v]), p.var_kind[v])] = int(p.var_degree[v])
        merged = [degree[(pos, kind)] for pos, kind, _, _ in arja_merge_plan(50)]
        assert merged == [12, 9, 6, 12, 9, 6]

    def test_merge_plan_targets_mid_chain(self):
        plan = arja_merge_plan(50)
        assert {pos for pos, *_ in plan} == {25, 26, 27, 28}

    def test_t1_is_modified_chain(self):
        assert build_cc_arja(20, 1).same_as(build_sc_arja(20, modified=True))


class TestCustom:
    def spec(self, connections):
        return CCSpec(T=2, chains_per_layer=[1, 1], component=EnsembleSpec("regular", L=10),
                      connections=connections)

    def test_no_connections_handshake(self):
        p = build_custom(self.spec([]))
        v, c = degree_profile(p)
        assert sum(v) == sum(c) == 2 * build_regular_chain(3, 6, 10).n_edges

    def test_single_edge(self):
        e = ConnectionEdge(1, 0, 5, 2, 0, 1)
        p = build_custom(self.spec([e]))
        assert chain_var_degrees(p, 1)[5] == [4, 3]

    def test_degree_cap_violation_names_edge(self):
        bad = ConnectionEdge(1, 0, 5, 2, 0, 1, multiplicity=5)
        with pytest.raises(InvalidSpec) as info:
            build_custom(self.spec([bad]))
        assert info.value.edge == bad

    def test_socket_reuse(self):
        edges = [ConnectionEdge(1, 0, 5, 2, 0, 1, multiplicity=4),
                 ConnectionEdge(1, 0, 6, 2, 0, 1)]
        with pytest.raises(InvalidSpec) as info:
            build_custom(self.spec(edges))
        assert info.value.edge == edges[1]

    def test_skip_layer_rejected(self):
        spec = CCSpec(T=3, chains_per_layer=[1, 1, 1], component=EnsembleSpec("regular", L=10),
                      connections=[ConnectionEdge(1, 0, 5, 3, 0, 1)])
        with pytest.raises(InvalidSpec):
            build_custom(spec)

    def test_dict_round_trip(self, tmp_path):
        spec = self.spec([ConnectionEdge(1, 0, 5, 2, 0, 1, multiplicity=2)])
        d = spec_to_dict(spec)
        json.dumps(d)
        assert spec_from_dict(d) == spec
        path = tmp_path / "cc.json"
        save_spec(spec, path)
        assert build_custom(load_spec(path)).same_as(build_custom(spec))
