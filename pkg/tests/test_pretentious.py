import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ulab.agents.base import AgentInput
from ulab.agents.pretentious import (
    PretentiousAgent,
    characters_mod,
    m_score,
    m_score_cost,
    pretentious_distance,
    twisted_character_on_primes,
)
from ulab.core.errors import BudgetExceededError, InvalidParameterError
from ulab.core.tables import MultSpec

ONE = MultSpec.custom({}, default=1.0)


class TestCharacters:
    def test_modulus_one(self):
        chars = characters_mod(1)
        assert len(chars) == 1
        assert chars[0](np.arange(1, 10)).tolist() == [1] * 9

    def test_modulus_four(self):
        principal, chi = characters_mod(4)
        assert principal.is_principal
        assert chi(3) == pytest.approx(-1)
        assert chi(2) == 0
        assert chi.is_real()

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from([3, 5, 7, 8, 9, 12, 15, 16, 21, 24]))
    def test_orthogonality(self, q):
        chars = characters_mod(q)
        phi = sum(math.gcd(n, q) == 1 for n in range(1, q + 1))
        assert len(chars) == phi
        n = np.arange(1, q + 1)
        gram = np.array([[np.sum(a(n) * np.conj(b(n))) for b in chars] for a in chars])
        assert np.allclose(gram, phi * np.eye(phi), atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.sampled_from([5, 8, 9, 12, 20]), st.integers(1, 200), st.integers(1, 200))
    def test_multiplicative(self, q, m, n):
        for chi in characters_mod(q):
            assert chi(m * n) == pytest.approx(chi(m) * chi(n), abs=1e-12)

    def test_bad_modulus(self):
        with pytest.raises(InvalidParameterError):
            characters_mod(0)


class TestDistance:
    def test_self_distance(self):
        assert pretentious_distance(MultSpec.liouville(), MultSpec.liouville(), 1000) == 0

    def test_liouville_against_one(self):
        expected = math.sqrt(2 * (1 / 2 + 1 / 3 + 1 / 5 + 1 / 7))
        assert pretentious_distance(MultSpec.liouville(), ONE, 10) == pytest.approx(expected, abs=1e-12)

    def test_liouville_against_minus_one(self):
        assert pretentious_distance(MultSpec.liouville(), MultSpec.custom({}, default=-1.0), 500) == 0

    def test_callable_prime_values(self):
        chi = characters_mod(1)[0]
        d = pretentious_distance(twisted_character_on_primes(chi, 0.0), ONE, 100)
        assert d == pytest.approx(0, abs=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_triangle_inequality(self, s, t, u):
        chi = characters_mod(1)[0]
        f, g, h = (twisted_character_on_primes(chi, v) for v in (s, t, u))
        X = 300
        assert pretentious_distance(f, h, X) <= pretentious_distance(f, g, X) + pretentious_distance(g, h, X) + 1e-9

    def test_rejects_von_mangoldt(self):
        with pytest.raises(InvalidParameterError):
            pretentious_distance(MultSpec.von_mangoldt(), ONE, 10)

    def test_rejects_small_x(self):
        with pytest.raises(InvalidParameterError):
            pretentious_distance(ONE, ONE, 1)


class TestMScore:
    def test_model_in_family_scores_zero(self):
        score = m_score(MultSpec.character_twist(1, 0, 0.5), 200, 3, 0.05)
        assert score.value == pytest.approx(0, abs=1e-6)
        assert score.argmin_character == (1, 0)
        assert score.argmin_t == pytest.approx(0.5, abs=1e-6)

    def test_character_zeros_count(self):
        # f(5) = 0, so every candidate pays the p = 5 term in full
        score = m_score(MultSpec.character_twist(5, 2, 0.5), 200, 5, 0.05)
        assert score.value == pytest.approx(math.sqrt(1 / 5), abs=1e-9)
        assert score.argmin_character == (5, 2)
        assert score.argmin_t == pytest.approx(0.5, abs=1e-6)

    def test_moebius_and_liouville_agree(self):
        a = m_score(MultSpec.moebius(), 500, 3, 0.1)
        b = m_score(MultSpec.liouville(), 500, 3, 0.1)
        assert a.value == pytest.approx(b.value, abs=1e-12)

    def test_value_bounded_by_distance_to_one(self):
        score = m_score(MultSpec.liouville(), 1000, 1, 0.05)
        assert score.value <= pretentious_distance(MultSpec.liouville(), ONE, 1000) + 1e-12

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameterError):
            m_score(MultSpec.liouville(), 100, 0, 0.1)
        with pytest.raises(InvalidParameterError):
            m_score(MultSpec.liouville(), 100, 1, 0.0)

    def test_cost_counts_grid_points_primes_and_characters(self):
        assert m_score_cost(10, 1, 1.0, t_max=2) == 5 * 4 * 1
        assert m_score_cost(10, 3, 1.0, t_max=2) == 5 * 4 * 4
        assert m_score_cost(10, 1, 1.0) == 21 * 4

    def test_unbounded_t_range_exceeds_budget(self):
        with pytest.raises(BudgetExceededError):
            m_score(MultSpec.liouville(), 10**5, 10, 0.05, budget=1e9)
        assert m_score_cost(10**5, 10, 0.05, t_max=10) <= 1e9

    @pytest.mark.slow
    def test_liouville_score_grows(self):
        t_res = 1 / (2 * math.log(10**5))
        small = m_score(MultSpec.liouville(), 10**3, 1, t_res, t_max=100)
        large = m_score(MultSpec.liouville(), 10**5, 1, t_res, t_max=100)
        assert large.value > small.value


class TestAgent:
    def test_characters_operation(self):
        out = PretentiousAgent().run(AgentInput("characters", {"q": 5}))
        assert out.metadata["count"] == 4

    def test_distance_operation(self):
        out = PretentiousAgent().run(AgentInput("distance", {"f": "liouville", "X": 10}))
        assert out.data.iloc[0]["distance_sq"] == pytest.approx(2 * (1 / 2 + 1 / 3 + 1 / 5 + 1 / 7))
