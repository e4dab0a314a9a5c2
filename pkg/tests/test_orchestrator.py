import pandas as pd
import pytest

from ulab.agents.base import AgentOutput
from ulab.agents.pretentious import m_score_cost
from ulab.core.config import ExperimentConfig, ExperimentParams
from ulab.core.errors import InvalidParameterError
from ulab.core.numerics import DEFAULT_BUDGET
from ulab.core.orchestrator import (
    SUITES,
    ExperimentOrchestrator,
    _step,
    close_check,
    monotone_check,
    zero_failures_check,
)


def _cfg(kind, **params):
    return ExperimentConfig(kind=kind, seed=1, params=ExperimentParams(**params))


def _out(operation, **columns):
    return AgentOutput(agent="Test", operation=operation, data=pd.DataFrame(columns))


@pytest.fixture
def orch(cache_dir):
    return ExperimentOrchestrator(cache_dir=str(cache_dir))


class TestPlanning:
    def test_one_step_per_rung(self, orch):
        steps = orch.plan_experiment(_cfg("gowers-avg", X="10^3, 10^4", H="X^0.5"))
        assert [s["parameters"]["X"] for s in steps] == [1000, 10_000]
        assert [s["parameters"]["H"] for s in steps] == [32, 100]
        assert all(s["agent"] == "Norms" for s in steps)

    def test_patterns_grid(self, orch):
        steps = orch.plan_experiment(_cfg("patterns", ks="1..2", N="10, 100"))
        assert [(s["parameters"]["k"], s["parameters"]["N"]) for s in steps] == [(1, 10), (1, 100), (2, 10), (2, 100)]

    def test_nilseq_adds_equidistribution(self, orch):
        steps = orch.plan_experiment(_cfg("nilseq", X="1000", H="100", N="100, 1000"))
        assert [s["operation"] for s in steps] == ["discorrelation", "equidistribution_defect",
                                                   "equidistribution_defect"]

    @pytest.mark.parametrize("name", SUITES)
    def test_suites_plan(self, orch, name):
        steps, checks = orch.plan_suite(name)
        assert steps and checks
        assert all(s["agent"] in orch.agents for s in steps)

    def test_unknown_suite(self, orch):
        with pytest.raises(InvalidParameterError):
            orch.plan_suite("decay-u7")

    def test_pretentious_growth_fits_the_default_budget(self, orch):
        steps, _ = orch.plan_suite("pretentious-growth")
        rungs = [s["parameters"] for s in steps if s["operation"] == "m_score"]
        assert [p["X"] for p in rungs] == [10**3, 10**4, 10**5]
        assert len({p["t_max"] for p in rungs}) == 1
        for p in rungs:
            assert m_score_cost(p["X"], p["Q"], p["t_resolution"], p["t_max"]) <= DEFAULT_BUDGET

    def test_pretentious_config_passes_t_max(self, orch):
        steps = orch.plan_experiment(_cfg("pretentious", X="100", Q=2, t_max=5.0))
        assert steps[0]["parameters"]["t_max"] == 5.0


class TestRun:
    def test_sieve_rows(self, orch):
        res = orch.run_config(_cfg("sieve", start=1, end=10))
        assert res.passed
        assert [r.values["value"] for r in res.rows] == [1, -1, -1, 1, -1, 1, -1, -1, 1, 1]
        assert res.rows[0].experiment == "sieve:sieve"
        assert "partial sum" in res.narrative

    def test_failed_step_is_reported(self, orch, monkeypatch):
        monkeypatch.setenv("ULAB_MAX_TABLE", "100")
        res = orch.run_config(_cfg("sieve", start=1, end=5000))
        assert not res.passed
        assert res.steps_executed[0]["success"] is False
        assert "MultSieve.sieve" in res.narrative

    def test_unexpected_exception_is_recorded(self, orch, monkeypatch):
        def boom(agent_input):
            raise ValueError("bad value")

        monkeypatch.setattr(orch.agents["MultSieve"], "run", boom)
        res = orch.run_config(_cfg("sieve", start=1, end=5))
        assert not res.passed
        assert res.outputs[0].error == "bad value"
        assert "MultSieve.sieve: bad value" in res.narrative

    def test_remaining_steps_run_after_a_failure(self, orch):
        steps = [_step("Nilmanifold", "equidistribution_defect", coeffs="1:abc:0:0", N=10),
                 _step("MultSieve", "sieve", spec="liouville", start=1, end=5)]
        outputs, executed, rows = orch.execute("mixed", steps)
        assert [s["success"] for s in executed] == [False, True]
        assert "abc" in outputs[0].error
        assert len(rows) == 5

    def test_distance_ladder_grows(self, orch):
        steps = [_step("Pretentious", "distance", f="liouville", g={"kind": "character_twist"}, X=X)
                 for X in (10, 100, 1000)]
        outputs, _, _ = orch.execute("distance-ladder", steps)
        check = monotone_check("D growth", "distance", "distance_sq", True, False, 3)(outputs)
        assert check[0]["passed"]
        target = 2 * (1 / 2 + 1 / 3 + 1 / 5 + 1 / 7)
        assert close_check("D10", "distance", "distance_sq", target, 1e-12)(outputs[:1])[0]["passed"]

    @pytest.mark.slow
    def test_pretentious_growth_suite(self, orch):
        res = orch.run_suite("pretentious-growth")
        assert all(s["success"] for s in res.steps_executed)
        assert all(c["passed"] for c in res.checks)

    def test_workers_are_passed_down(self, cache_dir):
        orch = ExperimentOrchestrator(cache_dir=str(cache_dir), workers=2)
        res = orch.run_config(_cfg("chowla", X="1000", shifts="0, 1", epsilon=0.3))
        assert res.passed
        assert res.outputs[0].params["workers"] == 2

    def test_timing_column(self, cache_dir):
        res = ExperimentOrchestrator(cache_dir=str(cache_dir), timing=True).run_config(
            _cfg("sieve", start=1, end=5))
        assert all(r.wall_time is not None for r in res.rows)
        assert "wall_time" in res.rows[0].flat()

    def test_csv_output(self, orch, tmp_path):
        path = tmp_path / "out" / "sieve.csv"
        cfg = _cfg("sieve", start=1, end=6).model_copy(update={"output": str(path)})
        res = orch.run_config(cfg)
        data = path.read_bytes()
        assert res.output_path == str(path)
        assert data.startswith(b"experiment,n,value\r\n")
        assert data.count(b"\r\n") == 7

        again = orch.run_config(cfg)
        assert again.skipped
        assert path.read_bytes() == data

        forced = orch.run_config(cfg, force=True)
        assert not forced.skipped
        assert path.read_bytes() == data

    @pytest.mark.slow
    def test_algebra_experiment(self, orch):
        res = orch.run_config(_cfg("algebra", samples=3))
        assert res.passed
        assert all(int(r.values["failures"]) == 0 for r in res.rows)


class TestChecks:
    def test_strictly_decreasing(self):
        outs = [_out("avg", mean_norm=[v]) for v in (0.5, 0.4, 0.3)]
        assert monotone_check("decay", "avg", "mean_norm", True, True, 3)(outs)[0]["passed"]
        outs.append(_out("avg", mean_norm=[0.3]))
        assert not monotone_check("decay", "avg", "mean_norm", True, True, 4)(outs)[0]["passed"]
        assert monotone_check("decay", "avg", "mean_norm", False, True, 4)(outs)[0]["passed"]

    def test_missing_rung_fails(self):
        outs = [_out("avg", mean_norm=[0.5]), AgentOutput("Test", "avg", error="budget")]
        assert not monotone_check("decay", "avg", "mean_norm", True, True, 2)(outs)[0]["passed"]

    def test_close(self):
        outs = [_out("distance", distance_sq=[2.0 + 1e-14])]
        assert close_check("d", "distance", "distance_sq", 2.0, 1e-12)(outs)[0]["passed"]
        assert not close_check("d", "distance", "distance_sq", 2.5, 1e-12)(outs)[0]["passed"]
        assert not close_check("d", "other", "distance_sq", 2.0, 1e-12)(outs)[0]["passed"]

    def test_zero_failures(self):
        outs = [_out("verify", check=["a", "b"], trials=[10, 10], failures=[0, 1])]
        rows = zero_failures_check("algebra", "verify")(outs)
        assert [r["passed"] for r in rows] == [True, False]
        assert rows[1]["check"] == "algebra:b"
        assert not zero_failures_check("algebra", "verify")([])[0]["passed"]
