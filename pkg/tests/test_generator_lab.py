import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.backend.core.exceptions import (
    MalformedInputError,
    NegativeBaseError,
    NotConvexError,
    NotDecreasingError,
)
from app.backend.services.dist_core import lpm_at, make_distribution, make_interval
from app.backend.services.generator_lab import (
    FunctionTable,
    MollifierConfig,
    build_lemma5_approximant,
    iterated_cdf,
    iterated_integral,
    mollify,
    random_base_function,
    sample_generator_utility,
)
from app.backend.services.polyseg import lpm_curve
from app.backend.services.utility_classes import check_G, check_U

from tests.test_polyseg import distributions


class TestGeneratorUtility:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_random_base_gives_generator_member(self, unit_interval, rng, n):
        base = random_base_function(rng, unit_interval)
        u = sample_generator_utility(n, unit_interval, base, boundary_s=0.7)
        assert check_U(u, n).member
        assert check_G(u, n).member
        assert u.is_consistent()

    def test_constant_base_reproduces_power(self, unit_interval):
        # w ≡ (n+1)!, s = 0 이면 u = −(b−x)^{n+1}
        n = 2
        u = sample_generator_utility(n, unit_interval, np.full(257, 6.0), grid_resolution=257)
        x = unit_interval.grid(101)
        assert np.allclose(u.value(x), -((1.0 - x) ** 3), atol=1e-12)

    def test_boundary_only_gives_neg_power(self, unit_interval):
        n = 3
        u = sample_generator_utility(n, unit_interval, np.zeros(65), math.factorial(n), 65)
        x = unit_interval.grid(33)
        assert np.allclose(u.value(x), -((1.0 - x) ** n), atol=1e-12)

    def test_vanishing_derivatives_at_b(self, unit_interval, rng):
        n = 4
        u = sample_generator_utility(n, unit_interval, random_base_function(rng, unit_interval), 1.0)
        for k in range(0, n):
            assert u.derivative(1.0, k) == pytest.approx(0.0, abs=1e-12)
        assert u.derivative(1.0, n) == pytest.approx((-1.0) ** (n + 1))

    def test_derivative_tables_shape(self, unit_interval):
        u = sample_generator_utility(2, unit_interval, np.ones(33), grid_resolution=33)
        assert u.derivative_tables.shape == (4, 33)
        assert u.construction_log["base_samples"] == 33

    def test_negative_base(self, unit_interval):
        with pytest.raises(NegativeBaseError):
            sample_generator_utility(2, unit_interval, lambda x: x - 0.5)

    def test_negative_boundary(self, unit_interval):
        with pytest.raises(NegativeBaseError):
            sample_generator_utility(2, unit_interval, np.ones(257), boundary_s=-1.0)

    def test_base_shape_mismatch(self, unit_interval):
        with pytest.raises(MalformedInputError):
            sample_generator_utility(2, unit_interval, np.ones(10), grid_resolution=33)


class TestMollify:
    def test_affine_reproduced(self, unit_interval):
        table = FunctionTable.from_callable(lambda x: 2.0 - 3.0 * x, unit_interval, 65)
        smooth = mollify(table, MollifierConfig(width=0.05))
        x = unit_interval.grid(33)
        assert np.allclose(smooth.value(x), 2.0 - 3.0 * x, atol=1e-12)
        assert np.allclose(smooth.curvature(x), 0.0)

    def test_kink_within_lipschitz_width(self, unit_interval):
        width = 0.02
        table = FunctionTable.from_callable(
            lambda x: np.maximum(0.5 - x, 0.0), unit_interval, 1025
        )
        smooth = mollify(table, MollifierConfig(width=width))
        x = unit_interval.grid(2001)
        assert np.max(np.abs(smooth.value(x) - np.maximum(0.5 - x, 0.0))) <= width
        slopes = np.diff(smooth.value(x))
        assert np.all(slopes <= 1e-12)
        assert np.all(np.diff(slopes) >= -1e-12)
        # 꺾임점 밖에서는 곡률 0
        assert smooth.curvature(0.2) == pytest.approx(0.0, abs=1e-6)
        assert smooth.curvature(0.5) > 0.0

    def test_error_shrinks_with_width(self, unit_interval):
        table = FunctionTable.from_callable(
            lambda x: np.maximum(0.5 - x, 0.0), unit_interval, 1025
        )
        x = unit_interval.grid(4001)
        target = np.maximum(0.5 - x, 0.0)
        distances = []
        for width in (0.1, 0.05, 0.025):
            smooth = mollify(table, MollifierConfig(width=width))
            distances.append(float(np.max(np.abs(smooth.value(x) - target))))
        assert all(later <= earlier for earlier, later in zip(distances, distances[1:]))
        assert distances[-1] <= 0.025
        assert distances[-1] < 0.5 * distances[0]

    def test_constant_extension_adds_kink_at_b(self, unit_interval):
        table = FunctionTable.from_callable(lambda x: 1.0 - x, unit_interval, 65)
        smooth = mollify(table, MollifierConfig(width=0.1, right_extension="constant"))
        assert smooth.knots.tolist() == [1.0]
        assert smooth.slope(1.0) == pytest.approx(-0.5, abs=1e-6)

    def test_kernel_is_probability_density(self):
        config = MollifierConfig(width=1.0)
        assert config.kernel_weights.sum() == pytest.approx(1.0)
        assert config.kernel(np.array([1.5]))[0] == 0.0
        assert config.ramp(np.array([3.0]))[0] == pytest.approx(3.0, abs=1e-5)

    def test_rejects_increasing(self, unit_interval):
        table = FunctionTable.from_callable(lambda x: x, unit_interval, 17)
        with pytest.raises(NotDecreasingError):
            mollify(table, MollifierConfig(width=0.1))

    def test_rejects_concave(self, unit_interval):
        table = FunctionTable.from_callable(lambda x: 1.0 - x**2, unit_interval, 17)
        with pytest.raises(NotConvexError):
            mollify(table, MollifierConfig(width=0.1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MollifierConfig(width=0.0)


class TestLpmApproximant:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_converges_to_kinked_utility(self, unit_interval, n):
        c = 0.45
        x = unit_interval.grid(401)
        target = -np.maximum(c - x, 0.0) ** n
        errors = []
        for width in (0.08, 0.04, 0.02):
            u = build_lemma5_approximant(c, n, unit_interval, width)
            errors.append(float(np.max(np.abs(u.value(x) - target))))
        assert errors[-1] < errors[0]
        assert errors[-1] <= math.factorial(n) * 0.02

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_is_generator_member(self, unit_interval, n):
        u = build_lemma5_approximant(0.6, n, unit_interval, 0.05)
        assert check_G(u, n).member

    def test_expected_utility_matches_negative_lpm(self, unit_interval):
        F = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        assert lpm_at(F, 2, 0.6) == pytest.approx(0.18)
        u = build_lemma5_approximant(0.6, 2, unit_interval, 0.02)
        assert abs(F.expectation(u.value(F.atom_array)) + 0.18) <= 0.01

    def test_integration_error_falls_with_width(self, unit_interval):
        F = make_distribution([0.0, 0.3, 1.0], [0.25, 0.25, 0.5], unit_interval)
        target = -lpm_at(F, 2, 0.6)
        errors = []
        for halving in range(5):
            u = build_lemma5_approximant(0.6, 2, unit_interval, 0.16 / 2**halving)
            errors.append(abs(F.expectation(u.value(F.atom_array)) - target))
        assert all(later <= earlier + 1e-9 for earlier, later in zip(errors, errors[1:]))
        assert errors[-1] < errors[0]
        assert errors[-1] <= 1e-3

    def test_threshold_at_b_is_exact(self, unit_interval):
        u = build_lemma5_approximant(1.0, 3, unit_interval, 0.1)
        x = unit_interval.grid(51)
        assert np.allclose(u.value(x), -((1.0 - x) ** 3), atol=1e-10)

    def test_threshold_at_a_is_zero(self, unit_interval):
        u = build_lemma5_approximant(0.0, 2, unit_interval, 0.1)
        assert np.allclose(u.value(unit_interval.grid(11)), 0.0)

    def test_refutes_lottery_violation(self, lottery_pair):
        # F 에서 LPM 이 더 작은 임계값 2/3 에서 근사 효용은 G 쪽 기대효용을 낮춤
        F, G = lottery_pair
        u = build_lemma5_approximant(2.0 / 3.0, 2, F.support_interval, 0.01)
        assert G.expectation(u.value(G.atom_array)) - F.expectation(u.value(F.atom_array)) < 0

    def test_threshold_outside(self, unit_interval):
        with pytest.raises(MalformedInputError):
            build_lemma5_approximant(1.5, 2, unit_interval, 0.1)


class TestIteratedIntegrals:
    @given(dist=distributions(), j=st.integers(min_value=1, max_value=4))
    @settings(max_examples=50, deadline=None)
    def test_iterated_cdf_matches_scaled_lpm(self, dist, j):
        curve = iterated_cdf(dist, j)
        reference = lpm_curve(dist, j)
        for c in np.linspace(0.0, 1.0, 21):
            assert curve(c) == pytest.approx(reference(c) / math.factorial(j), abs=1e-10)

    def test_iterated_integral_value(self):
        interval = make_interval(0.0, 2.0)
        dist = make_distribution([0.0, 1.0], [0.5, 0.5], interval)
        assert iterated_integral(dist, 2, 2.0) == pytest.approx(lpm_at(dist, 2, 2.0) / 2.0)
        assert iterated_integral(dist, 2, 2.0) == pytest.approx(1.25)
