import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.backend.core.exceptions import (
    DegreeCapExceededError,
    IntervalMismatchError,
    MalformedInputError,
)
from app.backend.schemas.reports import CertificateVerdict
from app.backend.services.dist_core import lpm_at, make_distribution, make_interval
from app.backend.services.polyseg import (
    PiecewisePolynomial,
    certify_nonnegative,
    critical_points,
    isolate_real_roots,
    lpm_curve,
    subtract,
    tail_nonnegative,
)


@st.composite
def distributions(draw, max_atoms: int = 6):
    count = draw(st.integers(min_value=1, max_value=max_atoms))
    atoms = draw(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=count, max_size=count)
    )
    weights = draw(
        st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=count, max_size=count)
    )
    return make_distribution(atoms, weights, make_interval(0.0, 1.0), normalize=True)


class TestPiecewisePolynomial:
    def test_rejects_unsorted_breakpoints(self):
        with pytest.raises(MalformedInputError):
            PiecewisePolynomial(np.array([0.0, 0.5, 0.4]), np.zeros((2, 1)))

    def test_rejects_piece_count_mismatch(self):
        with pytest.raises(MalformedInputError):
            PiecewisePolynomial(np.array([0.0, 0.5, 1.0]), np.zeros((1, 2)))

    def test_evaluates_shifted_coefficients(self):
        # 조각 2: 1 + 2(c − 0.5)
        p = PiecewisePolynomial(np.array([0.0, 0.5, 1.0]), np.array([[0.0, 2.0], [1.0, 2.0]]))
        assert p(0.25) == pytest.approx(0.5)
        assert p(0.75) == pytest.approx(1.5)
        assert p.continuity_defect() == pytest.approx(0.0)

    def test_right_anchored_antiderivative(self, unit_interval):
        p = PiecewisePolynomial.constant(2.0, unit_interval)
        q = p.antiderivative(anchor="right", value=3.0)
        assert q(1.0) == pytest.approx(3.0)
        assert q(0.0) == pytest.approx(1.0)

    def test_dict_form(self):
        p = PiecewisePolynomial(np.array([0.0, 0.5, 1.0]), np.array([[0.0, 2.0], [1.0, 2.0]]))
        restored = PiecewisePolynomial.from_dict(p.to_dict())
        assert np.array_equal(restored.breakpoints, p.breakpoints)
        assert np.array_equal(restored.coeffs, p.coeffs)

    def test_from_dict_rejects_garbage(self):
        with pytest.raises(MalformedInputError):
            PiecewisePolynomial.from_dict({"breakpoints": [0.0, 1.0]})

    def test_subtract_requires_same_interval(self, unit_interval):
        p = PiecewisePolynomial.zero(unit_interval)
        q = PiecewisePolynomial.zero(make_interval(0.0, 2.0))
        with pytest.raises(IntervalMismatchError):
            subtract(p, q)


class TestLpmCurve:
    @given(dist=distributions(), n=st.integers(min_value=0, max_value=5))
    @settings(max_examples=100, deadline=None)
    def test_matches_direct_summation(self, dist, n):
        curve = lpm_curve(dist, n)
        for c in np.linspace(0.0, 1.0, 37):
            assert curve(c) == pytest.approx(lpm_at(dist, n, c), abs=1e-12)

    @given(dist=distributions(), n=st.integers(min_value=1, max_value=5))
    @settings(max_examples=50, deadline=None)
    def test_derivative_lowers_exponent(self, dist, n):
        slope = lpm_curve(dist, n).derivative()
        lower = lpm_curve(dist, n - 1)
        c = np.linspace(0.0, 1.0, 41)[1:]
        assert np.allclose(slope(c), n * lower(c), atol=1e-10)

    def test_zero_exponent_is_strict_at_left_endpoint(self, unit_interval):
        dist = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        curve = lpm_curve(dist, 0)
        assert curve(0.0) == 0.0
        assert curve(0.5) == pytest.approx(0.5)
        assert curve(1.0) == pytest.approx(0.5)
        assert curve(np.array([0.0, 1e-9])).tolist() == pytest.approx([0.0, 0.5])

    def test_zero_exponent_left_value_survives_json(self, unit_interval):
        dist = make_distribution([0.0], [1.0], unit_interval)
        restored = PiecewisePolynomial.from_dict(lpm_curve(dist, 0).to_dict())
        assert restored(0.0) == 0.0
        assert restored(0.25) == pytest.approx(1.0)

    def test_near_duplicate_atoms_subtract_exactly(self, unit_interval):
        A = make_distribution([0.3], [1.0], unit_interval)
        B = make_distribution([0.3 + 5e-15], [1.0], unit_interval)
        difference = lpm_curve(B, 2) - lpm_curve(A, 2)
        for c in [0.0, 0.3, 0.3 + 5e-15, 0.5, 1.0]:
            direct = lpm_at(B, 2, c) - lpm_at(A, 2, c)
            assert difference(c) == pytest.approx(direct, abs=1e-12)
        assert certify_nonnegative(difference).min_value == pytest.approx(0.0, abs=1e-12)

    def test_refine_keeps_values(self, lottery_pair):
        F, _ = lottery_pair
        curve = lpm_curve(F, 3)
        finer = curve.refine(np.array([0.0, 0.1, 0.5, 0.5 + 1e-14, 0.9, 1.0]))
        c = np.linspace(0.0, 1.0, 101)
        assert np.allclose(finer(c), curve(c), atol=1e-12)

    def test_degree_and_breakpoints(self, lottery_pair):
        _, G = lottery_pair
        curve = lpm_curve(G, 2)
        assert curve.degree == 2
        assert curve.breakpoints.tolist() == [0.0, 1.0]

    def test_degree_cap(self, lottery_pair):
        F, _ = lottery_pair
        with pytest.raises(DegreeCapExceededError):
            lpm_curve(F, 9)


class TestCertification:
    def test_lottery_minimum(self, lottery_pair):
        F, G = lottery_pair
        certificate = certify_nonnegative(lpm_curve(F, 2) - lpm_curve(G, 2))
        assert certificate.verdict is CertificateVerdict.VIOLATED_AT
        assert certificate.min_value == pytest.approx(-1.0 / 12.0, abs=1e-12)
        assert certificate.witness == pytest.approx(2.0 / 3.0, abs=1e-9)

    def test_reverse_lottery_nonnegative(self, lottery_pair):
        F, G = lottery_pair
        certificate = certify_nonnegative(lpm_curve(G, 2) - lpm_curve(F, 2))
        assert certificate.verdict is CertificateVerdict.NONNEGATIVE_EVERYWHERE
        assert certificate.min_value == pytest.approx(0.0, abs=1e-12)

    @given(F=distributions(), G=distributions(), n=st.integers(min_value=1, max_value=5))
    @settings(max_examples=100, deadline=None)
    def test_agrees_with_dense_grid(self, F, G, n):
        difference = lpm_curve(F, n) - lpm_curve(G, n)
        certificate = certify_nonnegative(difference)
        grid = np.linspace(0.0, 1.0, 20001)
        grid_min = float(np.min(difference(grid)))
        assert certificate.min_value <= grid_min + 1e-10
        # |D'| ≤ n 이므로 격자 최솟값과의 차이는 n·h 이하
        assert grid_min - certificate.min_value <= n * 1e-4
        assert difference(certificate.argmin) == pytest.approx(certificate.min_value, abs=1e-10)

    def test_tail_equal_means(self, unit_interval):
        # 평균 보존 확산: 지수 1 의 꼬리 차이는 0
        F = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        G = make_distribution([0.5], [1.0], unit_interval)
        assert tail_nonnegative(F, G, 1).verdict is CertificateVerdict.NONNEGATIVE_EVERYWHERE

    def test_tail_detects_eventual_violation(self, unit_interval):
        # 평균이 더 높은 F 는 충분히 큰 c 에서 LPM_1 이 더 작음
        F = make_distribution([1.0], [1.0], unit_interval)
        G = make_distribution([0.0], [1.0], unit_interval)
        certificate = tail_nonnegative(F, G, 1)
        assert certificate.verdict is CertificateVerdict.VIOLATED_AT
        assert certificate.witness >= 1.0


class TestRoots:
    def test_isolates_two_roots(self):
        # (s − 0.25)(s − 0.75) = 0.1875 − s + s²
        roots = sorted(isolate_real_roots(np.array([0.1875, -1.0, 1.0]), 0.0, 1.0))
        assert roots == pytest.approx([0.25, 0.75], abs=1e-10)

    def test_critical_point_of_quadratic(self):
        points = critical_points(np.array([-0.5, 1.0]), 1.0)
        assert points.tolist() == pytest.approx([0.5])

    def test_constant_has_no_critical_points(self):
        assert critical_points(np.array([3.0]), 1.0).size == 0
