from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ulab.agents.base import AgentInput
from ulab.agents.poly_algebra import (
    Interval,
    LocalPhase,
    PolyAlgebraAgent,
    RationalPoly,
    bezout_coefficients,
    bezout_split,
    binomial_poly,
    compare_phases,
    crt_align,
    dilate_phase,
    format_poly,
    intersection_integral,
    interval_comparable,
    is_integral,
    parse_poly,
    smooth_sup,
    sparsify,
    to_binomial_basis,
    verify_algebra,
)
from ulab.core.errors import InvalidParameterError

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=12)
scales = st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(1, 30)])


def C(j, delta=1):
    return binomial_poly(j, Fraction(delta))


class TestBinomialBasis:
    def test_square(self):
        assert to_binomial_basis(parse_poly("x^2")) == (0, 1, 2)

    def test_basis_element(self):
        assert to_binomial_basis(C(2)) == (0, 0, 1)

    def test_cube(self):
        assert to_binomial_basis(parse_poly("x^3")) == (0, 1, 6, 6)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(fractions, min_size=1, max_size=7), scales, fractions)
    def test_round_trip(self, coeffs, delta, t0):
        p = RationalPoly(tuple(coeffs))
        assert RationalPoly.from_binomial(to_binomial_basis(p, delta, t0), delta, t0) == p

    def test_nonpositive_scale(self):
        with pytest.raises(InvalidParameterError):
            to_binomial_basis(parse_poly("x"), 0)


class TestIntegrality:
    def test_half_square(self):
        assert not is_integral(parse_poly("x^2/2"))

    def test_basis_at_half_scale(self):
        assert is_integral(C(2, Fraction(1, 2)), Fraction(1, 2))

    def test_combination_at_half_scale(self):
        p = C(2, Fraction(1, 2)) * -2 + parse_poly("2*x")
        assert all(p(Fraction(i, 2)).denominator == 1 for i in range(11))
        assert is_integral(p, Fraction(1, 2))

    def test_intersection(self):
        assert intersection_integral(C(2, Fraction(1, 6)), 2, 3)
        assert not intersection_integral(parse_poly("x/2"), 3, 4)

    def test_intersection_needs_coprime(self):
        with pytest.raises(InvalidParameterError):
            intersection_integral(C(1), 2, 4)


class TestBezout:
    def test_coefficients(self):
        q, r = bezout_coefficients(1, 2, 3)
        assert q * 2 + r * 3 == 1
        assert (q, r) == (-1, 1)

    def test_zero(self):
        ga, gb = bezout_split(RationalPoly.zero(3), 2, 3)
        assert ga.is_zero() and gb.is_zero()

    def test_linear(self):
        ga, gb = bezout_split(parse_poly("x"), 2, 3)
        assert ga == parse_poly("-2*x")
        assert gb == parse_poly("3*x")

    def test_quadratic(self):
        ga, gb = bezout_split(C(2), 2, 3)
        assert ga == C(2, Fraction(1, 2)) * -2 + parse_poly("2*x")
        assert gb == C(2, Fraction(1, 3)) - parse_poly("3*x")
        assert is_integral(ga, Fraction(1, 2)) and is_integral(gb, Fraction(1, 3))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-20, 20), min_size=1, max_size=6),
           st.sampled_from([(2, 3), (3, 4), (5, 7), (1, 9), (8, 15)]))
    def test_split_properties(self, cs, ab):
        a, b = ab
        gamma = RationalPoly.from_binomial(cs)
        ga, gb = bezout_split(gamma, a, b)
        assert ga + gb == gamma
        assert is_integral(ga, Fraction(1, a))
        assert is_integral(gb, Fraction(1, b))

    def test_not_coprime(self):
        with pytest.raises(InvalidParameterError):
            bezout_split(C(1), 2, 4)

    def test_not_integral(self):
        with pytest.raises(InvalidParameterError):
            bezout_split(parse_poly("x/2"), 2, 3)


class TestCrtAlign:
    def test_single_pair(self):
        assert crt_align([(5, C(3))]) == C(3)

    def test_equal_inputs(self):
        assert crt_align([(2, C(1)), (3, C(1))]) == C(1)

    def test_mixed(self):
        parts = [(2, C(2)), (3, C(1))]
        gamma = crt_align(parts)
        for p, g in parts:
            assert is_integral(g - gamma, Fraction(1, p))

    def test_three_primes(self):
        parts = [(2, C(2) * 3), (5, C(3)), (7, C(1) * -4)]
        gamma = crt_align(parts)
        assert all(is_integral(g - gamma, Fraction(1, p)) for p, g in parts)

    def test_rejects_repeats_and_composites(self):
        with pytest.raises(InvalidParameterError):
            crt_align([(2, C(1)), (2, C(2))])
        with pytest.raises(InvalidParameterError):
            crt_align([(4, C(1))])
        with pytest.raises(InvalidParameterError):
            crt_align([])


class TestComparePhases:
    I10 = Interval.from_endpoints(0, 10)

    def test_reflexive(self):
        phi = LocalPhase(self.I10, parse_poly("x^2/3 + 1/7"))
        dec = compare_phases(phi, phi, Fraction(1, 3), 1.0)
        assert dec.eps.is_zero() and dec.gamma.is_zero()

    def test_integral_shift(self):
        p2 = parse_poly("x^2/3 + 1/7")
        dec = compare_phases(LocalPhase(self.I10, p2 + C(2)), LocalPhase(self.I10, p2), 1, 1.0)
        assert dec.eps.is_zero()
        assert dec.gamma == C(2)

    def test_linear_integral_shift(self):
        I = Interval.from_endpoints(0, 100)
        p2 = parse_poly("x/5")
        dec = compare_phases(LocalPhase(I, p2 + parse_poly("10*x")), LocalPhase(I, p2), 1, 1.0)
        assert dec.gamma == parse_poly("10*x")
        assert dec.smooth_bound == 0

    def test_large_quadratic_rejected(self):
        I = Interval.from_endpoints(0, 100)
        assert compare_phases(LocalPhase(I, parse_poly("2*x^2/5")), LocalPhase(I, RationalPoly.zero(2)),
                              1, 1.0) is None

    def test_incomparable_intervals(self):
        phi1 = LocalPhase(Interval.from_endpoints(0, 1), C(1))
        phi2 = LocalPhase(Interval.from_endpoints(100, 101), C(1))
        assert compare_phases(phi1, phi2, 1, 2.0) is None

    def test_sparsify(self):
        dec = compare_phases(LocalPhase(self.I10, C(2) * 6), LocalPhase(self.I10, RationalPoly.zero(2)), 1, 1.0)
        coarse = sparsify(dec, 3)
        assert coarse.delta == 3
        assert is_integral(coarse.gamma, 3)

    def test_dilate_phase(self):
        phi = dilate_phase(LocalPhase(self.I10, parse_poly("x^2")), 2)
        assert (phi.interval.lo, phi.interval.hi) == (0, 20)
        assert phi.poly == parse_poly("x^2/4")


class TestIntervals:
    def test_equal(self):
        I = Interval.from_endpoints(0, 10)
        assert interval_comparable(I, I, 1)

    def test_far_apart(self):
        assert not interval_comparable(Interval.from_endpoints(0, 1), Interval.from_endpoints(100, 101), 2)

    def test_overlapping(self):
        assert interval_comparable(Interval.from_endpoints(0, 10), Interval.from_endpoints(5, 20), 2)

    def test_positive_length(self):
        with pytest.raises(InvalidParameterError):
            Interval.from_endpoints(3, 3)


def test_smooth_sup_uses_critical_points():
    # (t - 5)^2 - 4 on [0, 10]: endpoints give 21, the vertex gives 4
    assert smooth_sup(parse_poly("x^2 - 10*x + 21"), Interval.from_endpoints(0, 10)) == pytest.approx(21)
    assert smooth_sup(parse_poly("x^2 - 10*x + 21"), Interval.from_endpoints(3, 7)) == pytest.approx(4)


def test_format_and_parse():
    p = parse_poly("1/2 - 3*x + x^3")
    assert format_poly(p) == "1/2 - 3*x + 1*x^3"
    assert parse_poly(format_poly(p)) == p
    with pytest.raises(InvalidParameterError):
        parse_poly("x +* 2")


def test_degree_bound():
    with pytest.raises(InvalidParameterError):
        RationalPoly((1, 2, 3), k=1)


def test_verify_algebra_finds_no_failures():
    report = verify_algebra(trials=60, seed=3)
    assert set(report["check"]) == {"binomial_round_trip", "bezout_split", "crt_align", "compare_phases"}
    assert report["failures"].sum() == 0


@pytest.mark.slow
def test_verify_algebra_full():
    assert verify_algebra(trials=2500, seed=0)["failures"].sum() == 0


class TestAgent:
    def test_bezout_operation(self):
        out = PolyAlgebraAgent().run(AgentInput("bezout", {"poly": "x", "a": 2, "b": 3}))
        assert out.data.iloc[0]["gamma_a"] == "-2*x"
        assert out.data.iloc[0]["gamma_b"] == "3*x"

    def test_crt_operation(self):
        out = PolyAlgebraAgent().run(AgentInput("crt", {"pairs": [[2, "x^2/2 - x/2"], [3, "x"]]}))
        assert out.data["integral"].all()

    def test_verify_operation(self):
        out = PolyAlgebraAgent().run(AgentInput("verify", {"trials": 10, "seed": 1}))
        assert out.data["failures"].sum() == 0
