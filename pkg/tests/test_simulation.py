import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scchain.cc_builder import CCSpec, ConnectionEdge, EnsembleSpec, spec_to_dict
from scchain.errors import InvalidParameters, InvalidSpec
from scchain.lifting import lift
from scchain.protographs import build_regular_chain, build_sc_arja
from scchain.scaling import ScalingParams
from scchain.simulation import (
    SimConfig,
    SimResult,
    compare_scaling,
    comparison_csv,
    ebn0_to_sigma,
    exact_bler,
    failure_weight_counts,
    mean_interval,
    monte_carlo_bler,
    run_campaign,
    structure_from_dict,
    transmitted_rate,
    wilson_interval,
)


@pytest.fixture(scope="module")
def tiny():
    return lift(build_regular_chain(3, 6, 3), 2, seed=1)


def small_cfg(**kw):
    base = dict(structure={"builder": "cc_regular", "L": 10, "T": 2}, N=20,
                points=[0.3, 0.45], trials=200, seed=3)
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"points": []},
        {"points": [0.4, 0.3]},
        {"trials": 0},
        {"channel": "bsc"},
        {"decoder": "minsum"},
        {"channel": "biawgn", "decoder": "peel"},
        {"points": [1.2]},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameters):
            small_cfg(**kw)

    def test_windowed_needs_schedule_for_cc(self):
        with pytest.raises(InvalidParameters):
            run_campaign(small_cfg(decoder="windowed"))


class TestCampaign:
    @pytest.fixture(scope="class")
    @staticmethod
    def result():
        return run_campaign(small_cfg())

    def test_byte_identical(self, result):
        assert run_campaign(small_cfg()).to_csv() == result.to_csv()

    def test_thread_count_irrelevant(self, result):
        assert run_campaign(small_cfg(threads=3)).to_csv() == result.to_csv()

    def test_layer_bounds(self, result):
        for x in result.points():
            whole = result.get(x, 0)
            for layer in (1, 2):
                row = result.get(x, layer)
                assert row.bler <= whole.bler
                assert row.bit_errors <= row.trials * row.bits_per_block
                assert 0 <= row.ber <= 1 and 0 <= row.bler <= 1
                assert row.bler_low <= row.bler <= row.bler_high

    def test_csv_round_trip(self, result, tmp_path):
        path = tmp_path / "sim.csv"
        text = result.to_csv(path)
        assert path.read_text() == text
        assert text.splitlines()[0].startswith("# schema: sim")
        back = SimResult.from_csv(text)
        assert back.points() == result.points()
        assert back.get(0.45, 1).block_errors == result.get(0.45, 1).block_errors

    def test_timing_column_optional(self, result):
        assert "wall_time" not in result.to_csv()
        assert "wall_time" in result.to_csv(timing=True)

    def test_zero_erasure(self):
        res = run_campaign(small_cfg(points=[0.0], trials=20))
        row = res.get(0.0)
        assert row.ber == row.bler == 0

    def test_target_errors_stop(self):
        res = run_campaign(small_cfg(points=[0.6], trials=5000, target_errors=10, batch=10))
        assert res.get(0.6).trials == 10

    def test_upper_layer_no_worse(self):
        res = run_campaign(small_cfg(points=[0.42], trials=400, N=40, target_errors=None))
        top, bottom = res.get(0.42, 1), res.get(0.42, 2)
        assert top.bler_low <= bottom.bler_high

    def test_windowed_single_chain(self):
        cfg = SimConfig({"builder": "regular", "L": 20}, N=30, points=[0.4], trials=100,
                        decoder="windowed", W=22)
        full = SimConfig({"builder": "regular", "L": 20}, N=30, points=[0.4], trials=100)
        assert run_campaign(cfg).get(0.4).block_errors == run_campaign(full).get(0.4).block_errors

    def test_awgn_runs(self):
        cfg = SimConfig({"builder": "arja", "L": 8}, N=20, channel="biawgn", points=[1.0, 4.0],
                        trials=100, target_errors=None)
        res = run_campaign(cfg)
        assert res.get(4.0).bler <= res.get(1.0).bler


class TestStructures:
    def test_builder_form(self):
        p = structure_from_dict({"builder": "cc_regular", "L": 12, "T": 2})
        assert p.n_vars == 48

    def test_full_spec_form(self):
        spec = CCSpec(T=2, chains_per_layer=[1, 1], component=EnsembleSpec("regular", L=10),
                      connections=[ConnectionEdge(1, 0, 5, 2, 0, 1)])
        p = structure_from_dict(spec_to_dict(spec))
        assert p.var_degree.max() == 4

    def test_unknown_builder(self):
        with pytest.raises(InvalidSpec):
            structure_from_dict({"builder": "turbo", "L": 10})

    def test_transmitted_rate_excludes_punctured(self):
        p = build_sc_arja(10)
        # 50 protograph variables, 32 checks, 10 of the variables never sent
        assert p.n_vars - p.n_checks == 18 and (~p.punctured).sum() == 40
        assert transmitted_rate(p) == pytest.approx(18 / 40)

    def test_sigma(self):
        assert ebn0_to_sigma(0.0, 0.5) == pytest.approx(1.0)
        assert ebn0_to_sigma(10 * math.log10(2), 0.25) == pytest.approx(1.0)


class TestIntervals:
    def test_wilson_zero(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == 0 and hi == pytest.approx(0.2775, abs=1e-3)

    @given(st.integers(0, 200), st.integers(1, 200))
    def test_wilson_contains_estimate(self, k, extra):
        n = k + extra
        lo, hi = wilson_interval(k, n)
        assert 0 <= lo <= k / n <= hi <= 1

    def test_mean_interval_degenerate(self):
        assert mean_interval(0.0, 0.0, 10) == (0.0, 0.0)


class TestOracle:
    def test_endpoints(self, tiny):
        assert exact_bler(tiny, 0.0) == 0.0
        assert exact_bler(tiny, 1.0) == 1.0

    def test_exact_rational(self, tiny):
        val = exact_bler(tiny, Fraction(3, 10))
        assert isinstance(val, Fraction)
        assert float(val) == pytest.approx(exact_bler(tiny, 0.3), rel=1e-12)

    def test_monotone(self, tiny):
        counts = failure_weight_counts(tiny)
        vals = [exact_bler(tiny, e, counts) for e in np.linspace(0, 1, 50)]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_counts_cover_all_patterns(self, tiny):
        counts = failure_weight_counts(tiny)
        n = tiny.n_transmitted
        assert counts.size == n + 1
        assert counts[-1] == 1 and counts[0] == 0
        assert all(c <= math.comb(n, k) for k, c in enumerate(counts))

    def test_too_large(self):
        with pytest.raises(InvalidParameters):
            failure_weight_counts(lift(build_regular_chain(3, 6, 6), 4, seed=0))

    def test_monte_carlo_million(self, tiny):
        p = exact_bler(tiny, 0.3)
        k, n = monte_carlo_bler(tiny, 0.3, 10**6, seed=7)
        assert abs(k / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


class TestCompare:
    def test_identical_inputs(self):
        res = run_campaign(small_cfg(points=[0.45, 0.5], trials=100))
        rows = compare_scaling(res, res, factor=1.0)
        assert all(r.ratio == 1.0 for r in rows)

    def test_grid_mismatch(self):
        a = run_campaign(small_cfg(points=[0.45], trials=20))
        b = run_campaign(small_cfg(points=[0.5], trials=20))
        with pytest.raises(InvalidParameters):
            compare_scaling(a, b)

    def test_csv_with_predictions(self):
        res = run_campaign(small_cfg(points=[0.45], trials=50))
        rows = compare_scaling(res, res, params=ScalingParams(alpha=0.6), L=10, N=20)
        text = comparison_csv(rows)
        head = text.splitlines()
        assert head[0].startswith("# schema: compare")
        assert len(head) == 3
        assert rows[0].ratio == pytest.approx(2.0) or rows[0].observed == 0
