import numpy as np
import pytest

from app.backend.core.exceptions import (
    BadOrderError,
    DerivativeOrderUnavailableError,
    EvaluationDomainError,
    IntervalMismatchError,
    MalformedInputError,
    VanishingFirstDerivativeError,
)
from app.backend.schemas.reports import MembershipClass
from app.backend.services.dist_core import make_interval
from app.backend.services.utility_classes import (
    Affine,
    CombinedUtility,
    CRRAUtility,
    LpmKink,
    NegPower,
    PolynomialUtility,
    PowerCRRAVariant,
    ap_slack,
    check_AP,
    check_G,
    check_LP,
    check_U,
    finite_difference_defect,
    lp_ratio,
    parse_utility,
    prop2_counterexample,
    prop2_ratio_at_zero,
)


class TestClosedForms:
    def test_neg_power_derivatives(self, unit_interval):
        u = NegPower(3, 1.0, unit_interval)
        assert u.value(0.0) == pytest.approx(-1.0)
        assert u.derivative(0.0, 1) == pytest.approx(3.0)
        assert u.derivative(0.0, 2) == pytest.approx(-6.0)
        assert u.derivative(0.0, 4) == pytest.approx(0.0)

    def test_power_crra_variant_slope_vanishes_at_b(self):
        interval = make_interval(0.5, 2.0)
        for gamma in (0.5, 1.0, 3.0):
            u = PowerCRRAVariant(gamma, 2.0, interval)
            assert u.derivative(2.0, 1) == pytest.approx(0.0, abs=1e-14)

    def test_log_utility(self):
        u = CRRAUtility(1.0, make_interval(1.0, 2.0))
        assert u.value(1.0) == pytest.approx(0.0)
        assert u.derivative(2.0, 1) == pytest.approx(0.5)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.5])
    def test_crra_derivatives_agree_with_differences(self, gamma):
        u = CRRAUtility(gamma, make_interval(0.5, 1.5))
        x = u.interval.grid(1025)
        for k in (1, 2, 3):
            # 중심차분 오차 h²·|u^{(k+2)}|/6
            bound = float(np.max(np.abs(u.derivative(x, k + 2)))) / 6.0
            assert finite_difference_defect(u, k) <= 1.01 * bound + 1e-3

    def test_lpm_kink_order_limit(self, unit_interval):
        u = LpmKink(2, 0.5, unit_interval)
        assert u.value(0.0) == pytest.approx(-0.25)
        assert u.value(0.8) == 0.0
        with pytest.raises(DerivativeOrderUnavailableError):
            u.derivative(0.2, 2)

    def test_outside_interval(self, unit_interval):
        with pytest.raises(EvaluationDomainError):
            NegPower(2, 1.0, unit_interval).value(1.5)

    def test_combination_rejects_negative_weight(self, unit_interval):
        with pytest.raises(MalformedInputError):
            CombinedUtility([(-1.0, NegPower(2, 1.0, unit_interval))])

    def test_combination_rejects_mixed_intervals(self, unit_interval):
        with pytest.raises(IntervalMismatchError):
            CombinedUtility(
                [
                    (1.0, NegPower(2, 1.0, unit_interval)),
                    (1.0, NegPower(2, 2.0, make_interval(0.0, 2.0))),
                ]
            )


class TestDescriptors:
    def test_json_descriptor(self, unit_interval):
        u = parse_utility('{"kind": "neg_power", "n": 2, "b": 1.0}', unit_interval)
        assert isinstance(u, NegPower)

    def test_yaml_descriptor_with_default_gamma(self):
        u = parse_utility("kind: prop2_counterexample\nn: 2\nb: 1.0\n", make_interval(0.0, 1.0))
        assert u.gamma == pytest.approx(3.0 / 8.0)

    def test_combination_descriptor(self, unit_interval):
        u = parse_utility(
            {
                "kind": "combination",
                "terms": [
                    {"weight": 2.0, "utility": {"kind": "neg_power", "n": 2, "b": 1.0}},
                    {"weight": 1.0, "utility": {"kind": "affine", "alpha": 1.0}},
                ],
                "constant": 0.5,
            },
            unit_interval,
        )
        assert u.value(0.0) == pytest.approx(-1.5)
        assert u.descriptor() is not None

    def test_descriptor_from_file(self, tmp_path, unit_interval):
        path = tmp_path / "u.json"
        path.write_text('{"kind": "affine", "alpha": 2.0, "beta": 1.0}', encoding="utf-8")
        assert parse_utility(str(path), unit_interval).value(1.0) == pytest.approx(3.0)

    def test_unknown_kind(self, unit_interval):
        with pytest.raises(MalformedInputError):
            parse_utility('{"kind": "exponential", "a": 1}', unit_interval)

    def test_extra_field(self, unit_interval):
        with pytest.raises(MalformedInputError):
            parse_utility({"kind": "affine", "alpha": 1.0, "gamma": 3.0}, unit_interval)


class TestMembershipU:
    def test_convex_function_fails_concavity(self, unit_interval):
        u = PolynomialUtility([0.0, 0.0, 1.0], unit_interval)
        report = check_U(u, 1)
        assert not report.member
        assert report.binding_criterion == "(-1)^2 u^(2) <= 0"

    def test_crra_is_member(self):
        assert check_U(CRRAUtility(2.0, make_interval(0.5, 1.0)), 3).member

    def test_kink_lacks_derivatives(self, unit_interval):
        with pytest.raises(DerivativeOrderUnavailableError):
            check_U(LpmKink(2, 0.5, unit_interval), 2)

    def test_report_consistency(self, unit_interval):
        report = check_U(NegPower(3, 1.0, unit_interval), 2)
        assert report.class_id is MembershipClass.U
        assert report.member == all(c.slack >= -report.tolerance for c in report.per_condition)
        assert unit_interval.a <= report.worst_location <= unit_interval.b


class TestMembershipG:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_neg_power_is_generator(self, unit_interval, n):
        assert check_G(NegPower(n, 1.0, unit_interval), n).member

    def test_crra_is_not_generator(self):
        report = check_G(CRRAUtility(2.0, make_interval(0.5, 1.0)), 2)
        assert not report.member
        assert report.binding_criterion == "u^(1)(b) = 0"

    def test_power_crra_variant_is_generator(self):
        interval = make_interval(0.5, 1.0)
        assert check_G(PowerCRRAVariant(2.0, 1.0, interval), 2).member


class TestPropositionCounterexample:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("b", [1.0, 2.0])
    def test_in_ap_not_in_lp(self, n, b):
        g = prop2_counterexample(n, b)
        assert check_AP(g, n).member
        lp = check_LP(g, n)
        assert not lp.member
        assert lp.worst_location < 0.5 * b
        assert lp_ratio(g, n, 0.0) == pytest.approx(prop2_ratio_at_zero(n), abs=1e-9)

    def test_ratio_value_for_n2(self):
        assert prop2_ratio_at_zero(2) == pytest.approx(5.0 / 12.0)

    def test_needs_order_two(self):
        with pytest.raises(BadOrderError):
            prop2_counterexample(1, 1.0)


class TestMembershipAPandLP:
    def test_affine_fails_ap(self, unit_interval):
        report = check_AP(Affine(1.0, 0.0, unit_interval), 2)
        assert not report.member
        assert report.binding_criterion == "(n-1)u' + u''(b-x) <= 0"

    def test_affine_is_ap_for_n1(self, unit_interval):
        assert check_AP(Affine(1.0, 0.0, unit_interval), 1).member

    def test_ap_slack_values(self, unit_interval):
        assert ap_slack(Affine(1.0, 0.0, unit_interval), 2, 0.3) == pytest.approx(1.0)
        v = PowerCRRAVariant(2.0, 1.0, make_interval(0.1, 1.0))
        assert ap_slack(v, 2, 0.5) == pytest.approx(-5.0)
        assert ap_slack(v, 2, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert check_AP(v, 2).member

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_neg_power_ratio_is_boundary(self, unit_interval, n):
        u = NegPower(n, 1.0, unit_interval)
        for x in np.linspace(0.0, 0.9, 1000):
            assert lp_ratio(u, n, float(x)) == pytest.approx((n - 1) / n, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_neg_power_in_lp_and_ap(self, unit_interval, n):
        u = NegPower(n, 1.0, unit_interval)
        assert check_LP(u, n).member
        assert check_AP(u, n).member

    def test_ratio_needs_nonzero_slope(self, unit_interval):
        with pytest.raises(VanishingFirstDerivativeError):
            lp_ratio(NegPower(2, 1.0, unit_interval), 2, 1.0)

    def test_lp_flags_vacuous_ratio(self, unit_interval):
        report = check_LP(PolynomialUtility([1.0], unit_interval), 2)
        assert "ratio_criterion_vacuous" in report.diagnostics
        assert report.member



class TestClassStructure:
    @pytest.fixture
    def positive_interval(self):
        return make_interval(0.1, 1.0)

    def test_power_crra_variant_in_lp(self, positive_interval):
        # φ(x) = (1 − x)/√x 는 볼록 감소, 비율 R = 2/(1+x)² ≥ 1/2
        v = PowerCRRAVariant(2.0, 1.0, positive_interval)
        assert check_LP(v, 2).member
        assert check_LP(v, 1).member

    def test_positive_combinations_stay_in_the_cone(self, positive_interval, rng):
        members = [
            NegPower(3, 1.0, positive_interval),
            NegPower(4, 1.0, positive_interval),
            PowerCRRAVariant(2.0, 1.0, positive_interval),
        ]
        for u in members:
            assert check_U(u, 2).member and check_LP(u, 2).member
        for _ in range(5):
            weights = rng.uniform(0.1, 2.0, size=len(members))
            combined = CombinedUtility(
                list(zip(weights.tolist(), members)), constant=float(rng.normal())
            )
            assert check_U(combined, 2).member
            assert check_AP(combined, 2).member
            assert check_LP(combined, 2).member

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_lp_classes_are_nested(self, unit_interval, positive_interval, n):
        candidates = [
            NegPower(2, 1.0, unit_interval),
            NegPower(3, 1.0, unit_interval),
            NegPower(5, 1.0, unit_interval),
            PowerCRRAVariant(2.0, 1.0, positive_interval),
            prop2_counterexample(n, 1.0),
        ]
        members = 0
        for u in candidates:
            if check_LP(u, n).member:
                members += 1
                assert check_LP(u, n - 1).member, u.label
        assert members >= 1
