import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ulab.agents.base import AgentInput
from ulab.agents.mult_sieve import sieve_liouville
from ulab.agents.phase_opt import (
    PhaseOptAgent,
    PhasePoint,
    archimedean_fit,
    averaged_weak_gowers,
    correlation,
    grid_sizes,
    log_taylor,
    weak_gowers,
    weyl_rationalize,
)
from ulab.agents.poly_algebra import Interval, RationalPoly, binomial_poly, parse_poly
from ulab.core.errors import BudgetExceededError, InvalidParameterError
from ulab.core.tables import MultSpec


class TestWeakGowers:
    def test_linear_phase_is_found(self):
        m = np.arange(32)
        f = np.exp(2j * np.pi * 0.3 * m)
        res = weak_gowers(f, 0, 32, 1, sigma=0.05)
        assert res.value == pytest.approx(1.0, abs=1e-9)
        assert res.value >= 1 - res.guarantee
        assert res.argmax.alphas[1] == pytest.approx(0.3, abs=1e-6)

    def test_quadratic_phase_is_found(self):
        m = np.arange(12)
        f = np.exp(2j * np.pi * (0.25 * m + m * m / 48))
        res = weak_gowers(f, 0, 12, 2, sigma=0.5)
        assert res.value == pytest.approx(1.0, abs=1e-6)

    def test_zero(self):
        assert weak_gowers(np.zeros(10), 0, 10, 2).value == 0

    def test_k_zero_is_mean(self):
        assert weak_gowers(np.array([1, -1, 1, 1]), 0, 4, 0).value == pytest.approx(0.5)

    def test_liouville_against_dense_frequency_scan(self):
        table = sieve_liouville(10_000, 10_064)
        res = weak_gowers(table, 10_000, 64, 1, sigma=0.05)
        values = table.window(10_000, 64).astype(float)
        dense = max(correlation(values, [0.0, theta]) for theta in np.linspace(0, 1, 20_001))
        assert res.value < 1
        assert res.value == pytest.approx(dense, abs=1e-2)

    def test_heuristic_mode(self):
        m = np.arange(40)
        f = np.exp(2j * np.pi * 0.71 * m)
        res = weak_gowers(f, 0, 40, 1, mode="heuristic", seed=3)
        assert res.value == pytest.approx(1.0, abs=1e-6)
        assert math.isinf(res.guarantee)

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            weak_gowers(np.ones(64), 0, 64, 3, sigma=0.01, budget=1e6)

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameterError):
            weak_gowers(np.ones(4), 0, 4, 1, sigma=0)
        with pytest.raises(InvalidParameterError):
            weak_gowers(np.ones(4), 0, 4, 1, mode="annealing")
        with pytest.raises(InvalidParameterError):
            weak_gowers(np.ones(4), 0, 5, 1)


UNIT = st.floats(0, 1, allow_nan=False, exclude_max=True)
SIGNS = st.lists(st.sampled_from([-1.0, 1.0]), min_size=8, max_size=8)


class TestWeakGowersBounds:
    @settings(max_examples=30, deadline=None)
    @given(UNIT, UNIT)
    def test_linear_phase_within_guarantee(self, a0, a1):
        m = np.arange(32)
        f = np.exp(2j * np.pi * (a0 + a1 * m))
        res = weak_gowers(f, 0, 32, 1, sigma=0.01)
        assert 1 - res.guarantee <= res.value <= 1 + 1e-9

    @settings(max_examples=10, deadline=None)
    @given(UNIT, UNIT)
    def test_quadratic_phase_within_guarantee(self, a1, a2):
        m = np.arange(12)
        f = np.exp(2j * np.pi * (a1 * m + a2 * m * m))
        res = weak_gowers(f, 0, 12, 2, sigma=0.05)
        assert 1 - res.guarantee <= res.value <= 1 + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                    min_size=16, max_size=16))
    def test_bounded_by_sup_norm(self, values):
        f = np.array(values, dtype=complex)
        for k in (0, 1):
            assert weak_gowers(f, 0, 16, k, sigma=0.05).value <= np.abs(f).max() + 1e-9

    @settings(max_examples=15, deadline=None)
    @given(SIGNS)
    def test_higher_degree_does_not_lose_correlation(self, signs):
        f = np.array(signs)
        mean = weak_gowers(f, 0, 8, 0).value
        linear = weak_gowers(f, 0, 8, 1, sigma=0.025)
        quadratic = weak_gowers(f, 0, 8, 2, sigma=0.025)
        assert linear.value >= mean - linear.guarantee
        assert quadratic.value >= linear.value - quadratic.guarantee
        assert quadratic.value <= 1 + 1e-9


def test_grid_sizes():
    assert grid_sizes(10, 2, 0.5) == [20, 200]


def test_averaged_weak_gowers_is_seeded():
    a = averaged_weak_gowers(MultSpec.liouville(), 1000, 16, 1, 4, seed=2, sigma=0.25)
    b = averaged_weak_gowers(MultSpec.liouville(), 1000, 16, 1, 4, seed=2, sigma=0.25)
    assert a[2] == b[2]
    assert 0 < a[0] <= 1


class TestWeylRationalize:
    def test_exact_half(self):
        approx = weyl_rationalize(PhasePoint(1, 0, [0.0, 0.5]), 100, 4)
        assert approx.q == 2
        assert approx.numerators == (0, 1)
        assert approx.residuals == (0.0,)

    def test_near_third(self):
        approx = weyl_rationalize(PhasePoint(1, 0, [0.0, 0.3334]), 100, 10)
        assert approx.q == 3
        assert approx.residuals[0] == pytest.approx(0.0002, abs=1e-12)

    def test_golden_ratio_has_no_small_denominator(self):
        phi = (1 + math.sqrt(5)) / 2 % 1
        assert weyl_rationalize(PhasePoint(1, 0, [0.0, phi]), 10_000, 5, 0.1) is None

    def test_tolerance_count(self):
        with pytest.raises(InvalidParameterError):
            weyl_rationalize(PhasePoint(2, 0, [0, 0.1, 0.2]), 10, 3, [1.0])


class TestArchimedeanFit:
    def test_integer_valued_polynomial(self):
        P = binomial_poly(2) * 3 + parse_poly("x")
        fit = archimedean_fit(P, Interval.from_endpoints(10, 20), 5)
        assert fit.T == 0
        assert fit.gamma == P
        assert fit.eps_sup == pytest.approx(0, abs=1e-9)

    def test_log_model_recovered(self):
        T0 = 1000.0
        I = Interval.from_endpoints(1000, 1050)
        P = log_taylor(I.mid, 2) * Fraction(T0 / (2 * math.pi))
        fit = archimedean_fit(P, I, 10)
        assert fit.T == pytest.approx(T0, rel=1e-9)
        assert fit.gamma.is_zero()
        assert fit.eps_sup < 1e-2
        assert np.max(np.abs(fit.remainder(np.linspace(1000, 1050, 11)))) <= fit.eps_sup + 1e-12

    def test_rational_part_recovered(self):
        I = Interval.from_endpoints(1000, 1050)
        P = log_taylor(I.mid, 2) * Fraction(1000 / (2 * math.pi)) + binomial_poly(2) * Fraction(1, 3)
        fit = archimedean_fit(P, I, 10)
        assert fit.q == 3
        assert fit.gamma == binomial_poly(2) * Fraction(1, 3)
        assert fit.T == pytest.approx(1000, rel=1e-6)

    def test_needs_positive_interval(self):
        with pytest.raises(InvalidParameterError):
            archimedean_fit(parse_poly("x^2"), Interval.from_endpoints(-1, 1), 3)

    def test_needs_nonconstant(self):
        with pytest.raises(InvalidParameterError):
            archimedean_fit(RationalPoly.constant(3), Interval.from_endpoints(1, 2), 3)


class TestAgent:
    def test_rationalize_operation(self):
        out = PhaseOptAgent().run(AgentInput("rationalize", {"alphas": [0.5], "H": 100, "Q": 4}))
        assert out.data.iloc[0]["q"] == 2

    def test_weak_gowers_operation(self):
        out = PhaseOptAgent().run(AgentInput("weak_gowers", {"x": 10_000, "H": 32, "k": 1, "sigma": 0.25}))
        row = out.data.iloc[0]
        assert 0 < row["value"] < 1
        assert "alpha_1" in out.data.columns
