import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.backend.core.exceptions import (
    BadOrderError,
    EvaluationDomainError,
    IntervalMismatchError,
)
from app.backend.schemas.reports import DominanceOrder
from app.backend.services.dist_core import make_distribution, make_interval, theta_lottery
from app.backend.services.dominance import (
    check_bsd,
    check_lpm_at,
    check_sd,
    expected_utility_gap,
    sd_implies_bsd,
)
from app.backend.services.polyseg import lpm_curve
from app.backend.services.utility_classes import CRRAUtility, NegPower

from tests.test_polyseg import distributions


class TestBoundedDominance:
    def test_lottery_spread_side_holds(self, lottery_pair):
        F, G = lottery_pair
        verdict = check_bsd(G, F, 2)
        assert verdict.holds
        assert verdict.order is DominanceOrder.BSD
        assert verdict.min_margin == pytest.approx(0.0, abs=1e-12)
        assert verdict.witness_c is None

    def test_lottery_reverse_fails_with_witness(self, lottery_pair):
        F, G = lottery_pair
        verdict = check_bsd(F, G, 2)
        assert not verdict.holds
        assert verdict.min_margin == pytest.approx(-1.0 / 12.0, abs=1e-12)
        assert verdict.witness_c == pytest.approx(2.0 / 3.0, abs=1e-9)

    @pytest.mark.parametrize("theta", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_lottery_holds_in_exactly_one_direction(self, unit_interval, theta, n):
        F, G = theta_lottery(theta, n, unit_interval)
        generator_side = check_bsd(G, F, n)
        other_side = check_bsd(F, G, n)
        assert generator_side.holds
        assert not other_side.holds
        # LPM 곡선은 b 에서 같음
        assert lpm_curve(F, n)(1.0) == pytest.approx(lpm_curve(G, n)(1.0), abs=1e-12)

    def test_reflexive(self, unit_interval):
        F = make_distribution([0.1, 0.4, 0.9], [0.2, 0.5, 0.3], unit_interval)
        assert check_bsd(F, F, 3).holds

    @given(F=distributions(), n=st.integers(min_value=1, max_value=4))
    @settings(max_examples=50, deadline=None)
    def test_reflexive_for_random_distributions(self, F, n):
        verdict = check_bsd(F, F, n)
        assert verdict.holds
        assert verdict.min_margin == pytest.approx(0.0, abs=1e-12)

    @given(
        F=distributions(),
        G=distributions(),
        H=distributions(),
        n=st.integers(min_value=1, max_value=4),
    )
    @settings(max_examples=100, deadline=None)
    def test_transitive(self, F, G, H, n):
        first, second = check_bsd(F, G, n), check_bsd(G, H, n)
        if first.holds and second.holds:
            stacked = 3 * max(first.tolerance, second.tolerance)
            assert check_bsd(F, H, n, tolerance=stacked).holds

    def test_near_duplicate_point_masses_tie(self, unit_interval):
        A = make_distribution([0.3], [1.0], unit_interval)
        B = make_distribution([0.3 + 5e-15], [1.0], unit_interval)
        for n in (1, 2, 3):
            assert check_bsd(A, B, n).holds
            assert check_bsd(B, A, n).holds

    def test_interval_mismatch(self, lottery_pair):
        F, _ = lottery_pair
        other = make_distribution([0.5], [1.0], make_interval(0.0, 2.0))
        with pytest.raises(IntervalMismatchError):
            check_bsd(F, other, 2)

    def test_bad_exponent(self, lottery_pair):
        F, G = lottery_pair
        with pytest.raises(BadOrderError):
            check_bsd(F, G, 0)


class TestStochasticDominance:
    def test_first_degree_crossing_cdfs_fail_both_ways(self, unit_interval):
        F, G = theta_lottery(0.5, 1, unit_interval)
        assert not check_sd(G, F, 0).holds
        assert not check_sd(F, G, 0).holds

    def test_mean_preserving_spread(self, unit_interval):
        # 확산된 분포가 더 위험: 모든 c 에서 LPM_1 이 크거나 같음
        spread = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        center = make_distribution([0.5], [1.0], unit_interval)
        verdict = check_sd(spread, center, 1)
        assert verdict.holds
        assert verdict.order is DominanceOrder.SD
        assert not check_sd(center, spread, 1).holds

    @given(F=distributions(), G=distributions(), exponent=st.integers(min_value=1, max_value=4))
    @settings(max_examples=100, deadline=None)
    def test_sd_implies_bsd(self, F, G, exponent):
        sd, bsd = sd_implies_bsd(F, G, exponent)
        if sd.holds:
            assert bsd.holds


class TestSingleThreshold:
    def test_margin_at_threshold(self, lottery_pair):
        F, G = lottery_pair
        verdict = check_lpm_at(F, G, 1, 1.0)
        assert verdict.holds
        assert verdict.min_margin == pytest.approx(0.25)
        assert verdict.threshold == 1.0

    def test_failing_threshold_is_witness(self, lottery_pair):
        F, G = lottery_pair
        verdict = check_lpm_at(G, F, 1, 1.0)
        assert not verdict.holds
        assert verdict.witness_c == 1.0


class TestExpectedUtilityGap:
    def test_sign_convention(self, lottery_pair):
        F, G = lottery_pair
        u = NegPower(2, 1.0, make_interval(0.0, 1.0))
        # E_G u − E_F u = −0.25 − (−0.25)
        assert expected_utility_gap(F, G, u) == pytest.approx(0.0, abs=1e-15)

    def test_point_mass_preferred(self, lottery_pair):
        # G 의 LPM 곡선이 더 높으므로 G_2 효용은 F 를 선호
        F, G = lottery_pair
        u = NegPower(3, 1.0, make_interval(0.0, 1.0))
        assert expected_utility_gap(G, F, u) == pytest.approx(0.125)

    def test_undefined_utility(self, unit_interval):
        F = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        G = make_distribution([0.5], [1.0], unit_interval)
        with pytest.raises(EvaluationDomainError):
            expected_utility_gap(F, G, CRRAUtility(1.0, unit_interval))

    def test_dominance_implies_preference_for_power_utilities(self, unit_interval):
        F = make_distribution([0.0, 0.5, 1.0], [0.3, 0.2, 0.5], unit_interval)
        G = make_distribution([0.4, 0.9], [0.5, 0.5], unit_interval)
        for n in (1, 2, 3):
            if check_bsd(F, G, n).holds:
                for m in range(n, n + 3):
                    u = NegPower(m, 1.0, unit_interval)
                    assert expected_utility_gap(F, G, u) >= -1e-12
        assert np.isfinite(expected_utility_gap(F, G, NegPower(1, 1.0, unit_interval)))
