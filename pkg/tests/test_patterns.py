import logging
import math

import numpy as np
import pytest

from ulab.agents.base import AgentInput
from ulab.agents.mult_sieve import sieve_liouville
from ulab.agents.patterns import (
    PatternsAgent,
    chowla_average,
    parse_polys,
    pattern_growth,
    poly_average,
    sign_patterns,
    value_patterns,
    von_mangoldt_value,
    w_trick_weight,
)
from ulab.core.errors import BudgetExceededError, InvalidParameterError, TableRangeError
from ulab.core.tables import MultSpec

PLUS, MINUS = 0, 1


class TestSignPatterns:
    def test_length_one(self):
        assert sign_patterns(1, 2).count == 2

    def test_empty_pattern(self):
        assert sign_patterns(0, 10).count == 1

    def test_length_two_first_occurrences(self):
        res = sign_patterns(2, 20)
        assert res.count == 4
        assert res.first_occurrence == {
            (PLUS, MINUS): 0,
            (MINUS, MINUS): 1,
            (MINUS, PLUS): 2,
            (PLUS, PLUS): 8,
        }
        assert [r["pattern"] for r in res.to_records()] == ["+-", "--", "-+", "++"]

    def test_first_occurrences_match_the_window(self):
        res = sign_patterns(3, 500)
        lam = sieve_liouville(1, 503).values
        for pattern, n in res.first_occurrence.items():
            window = tuple(int(v < 0) for v in lam[n:n + 3])
            assert window == pattern

    def test_rescan_reproduces(self):
        assert sign_patterns(4, 3000).first_occurrence == sign_patterns(4, 3000).first_occurrence

    def test_all_short_patterns_occur(self):
        assert sign_patterns(4, 10**4).count == 16

    @pytest.mark.slow
    def test_all_length_four_patterns_by_a_million(self):
        assert sign_patterns(4, 10**6).count == 16

    def test_scan_shorter_than_pattern(self):
        with pytest.raises(InvalidParameterError):
            sign_patterns(5, 3)


class TestValuePatterns:
    def test_liouville_is_sign_patterns(self):
        assert value_patterns("liouville", 3, 400, 2).first_occurrence == sign_patterns(3, 400).first_occurrence

    def test_cube_roots_of_unity(self):
        spec = MultSpec.custom({}, default=np.exp(2j * np.pi / 3))
        assert value_patterns(spec, 1, 8, 3).count == 3
        assert value_patterns(spec, 2, 200, 3).count <= 9

    def test_rejects_zeros(self):
        with pytest.raises(InvalidParameterError):
            value_patterns("moebius", 2, 50, 2)

    def test_code_width(self):
        with pytest.raises(InvalidParameterError):
            value_patterns("liouville", 64, 100, 2)


def test_pattern_growth_is_monotone_and_bounded():
    df = pattern_growth(5, [10, 100, 1000, 10_000])
    counts = df["count"].tolist()
    assert counts == sorted(counts)
    assert max(counts) <= 32
    assert (df["bound"] == 32).all()


class TestChowla:
    def test_single_shift_is_mean_of_liouville(self):
        assert chowla_average([0], 10, 0.3).value == 0

    def test_single_shift_exact(self):
        X = 1000
        lam = sieve_liouville(1, X).values
        assert chowla_average([0], X, 0.2).value == pytest.approx(abs(lam.sum()) / X, abs=1e-15)

    def test_constant_weight(self):
        assert chowla_average([0, 1, 3], 500, 0.3, weight="one").value == pytest.approx(1.0)

    def test_shift_invariance(self):
        X, eps, c = 10**4, 0.3, 1
        H = math.floor(X ** eps + 1e-9)
        a = chowla_average([0, 1], X, eps).value
        b = chowla_average([c, 1 + c], X, eps).value
        assert abs(a - b) <= 2 * c * H / X

    def test_logarithmic(self):
        res = chowla_average([0, 1], 2000, 0.3, logarithmic=True)
        assert res.logarithmic
        assert 0 <= res.value < 1

    def test_short_table(self):
        with pytest.raises(TableRangeError):
            chowla_average([0, 2], 100, 0.5, table=sieve_liouville(1, 100))

    def test_bad_shifts(self):
        with pytest.raises(InvalidParameterError):
            chowla_average([1, 1], 100, 0.3)
        with pytest.raises(InvalidParameterError):
            chowla_average([0, -1], 100, 0.3)

    def test_epsilon_too_small(self):
        with pytest.raises(InvalidParameterError):
            chowla_average([0, 1], 100, -1.0)

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            chowla_average([0, 1], 10**4, 0.5, budget=1e3)

    def test_workers_do_not_change_the_value(self):
        assert chowla_average([0, 1, 2], 3000, 0.4, workers=4).value == chowla_average([0, 1, 2], 3000, 0.4).value


class TestPolyAverage:
    def test_linear_family_reduces_to_chowla(self):
        X, eps = 5000, 0.3
        poly = poly_average(["0", "m", "3*m"], X, eps, ["lambda"] * 3).value
        chowla = chowla_average([0, 1, 3], X, eps).value
        assert poly == pytest.approx(chowla, abs=1e-12)

    def test_von_mangoldt_mean(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ulab.agents.patterns"):
            res = poly_average(["m"], 10**5, 0.3, ["von_mangoldt"])
        assert res.value == pytest.approx(1.0, rel=0.05)
        assert "without a Liouville factor" in caplog.text

    def test_pair_permutation(self):
        a = poly_average(["m", "2*m"], 3000, 0.25, ["lambda", "von_mangoldt"]).value
        b = poly_average(["2*m", "m"], 3000, 0.25, ["von_mangoldt", "lambda"]).value
        assert a == pytest.approx(b, abs=1e-12)

    def test_two_variables(self):
        res = poly_average(["m1", "m2", "m1 + m2"], 2000, 0.2, ["lambda"] * 3)
        assert res.terms == math.floor(2000 ** 0.2 + 1e-9) ** 2
        assert 0 <= res.value <= 1

    def test_degenerate_family(self):
        with pytest.raises(InvalidParameterError):
            poly_average(["m", "m + 1"], 1000, 0.2, ["lambda", "lambda"])

    def test_epsilon_bound(self):
        with pytest.raises(InvalidParameterError):
            poly_average(["m^2", "0"], 1000, 0.6, ["lambda", "lambda"])

    def test_weight_count(self):
        with pytest.raises(InvalidParameterError):
            poly_average(["m", "2*m"], 1000, 0.2, ["lambda"])

    def test_non_integer_coefficients(self):
        with pytest.raises(InvalidParameterError):
            parse_polys(["m/2", "m"])


class TestWTrick:
    def test_trivial_modulus(self):
        assert w_trick_weight(1, 1, 6) == pytest.approx(math.log(7))

    def test_six(self):
        assert w_trick_weight(6, 1, 1) == pytest.approx(math.log(7) / 3)

    def test_prime_power(self):
        assert w_trick_weight(6, 3, 1) == pytest.approx(math.log(3) / 3)

    def test_composite(self):
        assert w_trick_weight(6, 3, 2) == 0

    def test_residue_range(self):
        with pytest.raises(InvalidParameterError):
            w_trick_weight(6, 0, 1)
        with pytest.raises(InvalidParameterError):
            w_trick_weight(6, 7, 1)


def test_von_mangoldt_value():
    assert [von_mangoldt_value(n) for n in (1, 2, 4, 6)] == [0.0, math.log(2), math.log(2), 0.0]


class TestAgent:
    def test_patterns_operation(self):
        out = PatternsAgent().run(AgentInput("patterns", {"k": 2, "N": 20}))
        assert out.data.iloc[0]["count"] == 4
        assert out.metadata["patterns"][-1] == {"pattern": "++", "first_n": 8}

    def test_w_trick_operation(self):
        out = PatternsAgent().run(AgentInput("w_trick", {"W": 6, "b": 1, "d": [1, 2, 3]}))
        assert out.data["weight"].tolist()[0] == pytest.approx(math.log(7) / 3)
        assert out.data["weight"].tolist()[1] == pytest.approx(math.log(13) / 3)
        assert out.data["weight"].tolist()[2] == pytest.approx(math.log(19) / 3)
