from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fitstar import ConfigError, ContractViolation
from fitstar.batch import (
    DECAY_STRATEGIES,
    BatchController,
    DecayInputs,
    batch_size,
    decay_factor,
    decay_variant,
    raw_ratio,
    sigmoid_smooth,
    tuning_parameter,
)

from . import oracles

unit = st.floats(0.0, 1.0, allow_nan=False)


class TestFormulas:
    def test_raw_ratio(self):
        assert raw_ratio(2.0, 2.0) == 1.0
        assert raw_ratio(0.7363108, 1.4726216) == 0.5
        for bad in [(0.0, 1.0), (1.0, 0.0), (1.1, 1.0)]:
            with pytest.raises(ContractViolation):
                raw_ratio(*bad)

    def test_sigmoid_anchors(self):
        assert sigmoid_smooth(0.5) == 0.5
        assert sigmoid_smooth(1.0) == pytest.approx(0.9933071, abs=1e-7)
        assert sigmoid_smooth(0.0) == pytest.approx(0.0066929, abs=1e-7)

    def test_decay_anchors(self):
        assert decay_factor(0.0, 100) == 0.0
        assert decay_factor(1.0, 100) == 1.0
        assert decay_factor(0.9933071, 100) == pytest.approx(0.9985593, abs=1e-7)
        with pytest.raises(ContractViolation):
            decay_factor(0.5, 0.0)

    def test_tuning_parameter(self):
        assert tuning_parameter(199, 1, 2) == 100
        assert tuning_parameter(199, 1, 8) == 25
        assert tuning_parameter(2, 1, 2) == 1.5
        with pytest.raises(ContractViolation):
            tuning_parameter(1, 1, 2)
        with pytest.raises(ContractViolation):
            tuning_parameter(10, 1, 1)

    def test_batch_size(self):
        assert batch_size(0.0, 1, 199) == 1
        assert batch_size(1.0, 1, 199) == 199
        assert batch_size(0.9985593, 1, 199) == 199
        # half-up rounding: 1 + 0.5 * 1 = 1.5 -> 2
        assert batch_size(0.5, 1, 2) == 2

    @settings(max_examples=300)
    @given(unit, st.floats(0.1, 1000.0))
    def test_chain_matches_oracle(self, xi, lam):
        o = sigmoid_smooth(xi)
        assert o == pytest.approx(oracles.sigmoid(xi), abs=1e-12)
        assert decay_factor(o, lam) == pytest.approx(oracles.decay(o, lam), abs=1e-12)

    @given(unit, st.integers(1, 50), st.integers(1, 500))
    def test_batch_size_range(self, psi, m_min, span):
        m = batch_size(psi, m_min, m_min + span)
        assert m_min <= m <= m_min + span
        assert abs(m - oracles.batch_value(psi, m_min, m_min + span)) <= 0.5 + 1e-9


class TestVariants:
    def test_sigmoid_log_midpoint(self):
        psi = decay_variant("fit-sl", DecayInputs(0.5, 100.0))
        assert psi == pytest.approx(math.log(51) / math.log(101), abs=1e-12)
        assert psi == pytest.approx(0.8519443, abs=1e-7)

    def test_linear(self):
        assert decay_variant("fit-l", DecayInputs(0.25)) == 0.25

    @pytest.mark.parametrize("strategy", ["fit-l", "fit-p", "fit-b"])
    def test_endpoints(self, strategy):
        assert decay_variant(strategy, DecayInputs(0.0)) == 0.0
        assert decay_variant(strategy, DecayInputs(1.0)) == 1.0

    def test_iteration_endpoints(self):
        assert decay_variant("fit-i", DecayInputs(0.3, iteration=0)) == 1.0
        assert decay_variant("fit-i", DecayInputs(0.3, iteration=100)) == 0.0
        assert decay_variant("fit-i", DecayInputs(0.3, iteration=250)) == 0.0

    def test_sigmoid_log_limits(self):
        # the smoothing keeps the sigmoid-log chain inside (0, 1) at the ratio extremes
        lo = decay_variant("fit-sl", DecayInputs(0.0))
        hi = decay_variant("fit-sl", DecayInputs(1.0))
        assert lo == pytest.approx(oracles.decay(oracles.sigmoid(0), 100), abs=1e-12)
        assert batch_size(lo, 1, 199) == 23
        assert batch_size(hi, 1, 199) == 199

    @pytest.mark.parametrize("strategy", ["fit-sl", "fit-l", "fit-p", "fit-b"])
    @given(a=unit, b=unit)
    def test_monotone(self, strategy, a, b):
        lo, hi = sorted((a, b))
        assert decay_variant(strategy, DecayInputs(lo)) <= decay_variant(strategy, DecayInputs(hi))

    @given(unit)
    def test_brachistochrone_on_cycloid(self, xi):
        psi = decay_variant("fit-b", DecayInputs(xi))
        assert 0.0 <= psi <= 1.0
        # inverse: y = (1 - cos t)/2  ->  t, then x must equal xi
        t = math.acos(1.0 - 2.0 * psi)
        assert (t - math.sin(t)) / math.pi == pytest.approx(xi, abs=1e-9)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            decay_variant("fit-x", DecayInputs(0.5))
        with pytest.raises(ConfigError):
            BatchController(2, strategy="fit-x")

    def test_inputs_validated(self):
        for bad in [dict(xi=-0.1), dict(xi=1.5), dict(xi=math.nan), dict(xi=0.5, iteration=-1)]:
            with pytest.raises(ContractViolation):
                DecayInputs(**bad)


def ellipse_measure(c, l_min=0.6):
    return math.pi * (c / 2) * math.sqrt(c * c - l_min * l_min) / 2


class TestController:
    def test_initial_state(self):
        ctl = BatchController(2)
        assert (ctl.m_min, ctl.m_max, ctl.lambda_tuning) == (1, 199, 100)
        assert ctl.current_batch == 199
        assert BatchController(2, strategy="fixed").current_batch == 100

    def test_no_solution(self):
        ctl = BatchController(2)
        assert ctl.on_cost_update(math.inf, ellipse_measure) is None
        assert ctl.current_batch == 199

    def test_first_solution_then_floor(self):
        ctl = BatchController(2)
        assert ctl.on_cost_update(1.0, ellipse_measure) == 199
        assert ctl.xi == 1.0
        assert ctl.on_cost_update(0.6 + 1e-12, ellipse_measure) == 23
        assert ctl.v_initial_writes == 1

    def test_idempotent_and_monotone(self):
        ctl = BatchController(2)
        ctl.on_cost_update(1.0, ellipse_measure)
        ctl.on_cost_update(0.8, ellipse_measure)
        m = ctl.current_batch
        assert ctl.on_cost_update(0.8, ellipse_measure) is None
        assert ctl.current_batch == m
        with pytest.raises(ContractViolation):
            ctl.on_cost_update(0.9, ellipse_measure)

    def test_straight_line_first_solution(self):
        ctl = BatchController(2)
        ctl.on_cost_update(0.6, ellipse_measure)
        assert ctl.xi == 0.0 and ctl.current_batch == 23

    def test_fixed_keeps_batch(self):
        ctl = BatchController(2, strategy="fixed")
        for c in (1.0, 0.8, 0.61):
            assert ctl.on_cost_update(c, ellipse_measure) == 100

    def test_iteration_count_reads_batches(self):
        ctl = BatchController(2, strategy="fit-i", iteration_budget=10)
        ctl.advance_iteration()
        assert ctl.iteration == 0  # no solution yet
        ctl.on_cost_update(1.0, ellipse_measure)
        for _ in range(5):
            ctl.advance_iteration()
        assert ctl.on_cost_update(0.9, ellipse_measure) == batch_size(0.5, 1, 199)

    def test_degenerate_range(self):
        ctl = BatchController(2, m_initial=1)
        assert ctl.m_max == 1 and ctl.current_batch == 1
        assert ctl.on_cost_update(1.0, ellipse_measure) == 1

    @pytest.mark.parametrize("strategy", DECAY_STRATEGIES + ("fixed",))
    @settings(max_examples=40, deadline=None)
    @given(costs=st.lists(st.floats(0.6, 2.0), min_size=1, max_size=30), m=st.integers(1, 300), n=st.integers(2, 8))
    def test_range_invariant(self, strategy, costs, m, n):
        ctl = BatchController(n, m_initial=m, strategy=strategy)
        prev = None
        for c in sorted(costs, reverse=True):
            ctl.advance_iteration()
            ctl.on_cost_update(c, ellipse_measure)
            assert 1 <= ctl.current_batch <= max(2 * m - 1, 1)
            if ctl.v_current is not None:
                assert ctl.v_current <= ctl.v_initial
            if strategy != "fit-i" and prev is not None:
                assert ctl.current_batch <= prev
            prev = ctl.current_batch
        assert ctl.v_initial_writes == 1
