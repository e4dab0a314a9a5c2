"""
Experiment Orchestrator
Turns an experiment config or a named suite into a plan of agent steps,
executes the steps in order, collects result rows, evaluates the suite's
trend checks and writes the CSV.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from ulab.agents.base import AgentInput, AgentOutput
from ulab.agents.mult_sieve import MultSieveAgent
from ulab.agents.nilmanifold import NilmanifoldAgent
from ulab.agents.norms import NormsAgent, parse_h_rule
from ulab.agents.patterns import PatternsAgent
from ulab.agents.phase_opt import PhaseOptAgent
from ulab.agents.poly_algebra import PolyAlgebraAgent
from ulab.agents.pretentious import PretentiousAgent
from ulab.core.config import ExperimentConfig, ResultRow
from ulab.core.errors import InvalidParameterError

logger = logging.getLogger(__name__)

Step = Dict[str, object]
Check = Callable[[List[AgentOutput]], List[dict]]

SUITES = ("decay-u2", "decay-weak", "pretentious-growth", "chowla-decay", "nil-discorrelation", "algebra-verify")
HEISENBERG_DEFAULT = "1:0.414213562373095:0.732050807568877:0"
# |t| bound shared by every rung of the pretentious-growth ladder
PRETENTIOUS_T_MAX = 10.0


@dataclass
class ExperimentResult:
    name: str
    steps_executed: List[dict]
    outputs: List[AgentOutput]
    rows: List[ResultRow]
    narrative: str
    checks: List[dict] = field(default_factory=list)
    output_path: Optional[str] = None
    skipped: bool = False

    @property
    def passed(self) -> bool:
        return all(s["success"] for s in self.steps_executed) and all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "steps_executed": self.steps_executed,
            "outputs": [o.to_dict() for o in self.outputs],
            "rows": [r.flat() for r in self.rows],
            "narrative": self.narrative,
            "checks": self.checks,
            "output_path": self.output_path,
            "skipped": self.skipped,
            "passed": self.passed,
        }


# ---------------------------------------------------------------------------
# Checks over step outputs
# ---------------------------------------------------------------------------

def _column(outputs: List[AgentOutput], operation: str, column: str) -> List[float]:
    return [float(o.data[column].iloc[0]) for o in outputs
            if o.operation == operation and o.ok and o.data is not None and column in o.data]


def monotone_check(name: str, operation: str, column: str, strict: bool, decreasing: bool,
                   expected: int) -> Check:
    def check(outputs: List[AgentOutput]) -> List[dict]:
        vals = _column(outputs, operation, column)
        pairs = list(zip(vals, vals[1:]))
        if decreasing:
            ok = all(b < a if strict else b <= a for a, b in pairs)
        else:
            ok = all(b > a if strict else b >= a for a, b in pairs)
        ok = ok and len(vals) == expected
        word = ("strictly " if strict else "") + ("decreasing" if decreasing else "increasing")
        return [{"check": name, "passed": ok,
                 "detail": f"{column} {word}: " + ", ".join(f"{v:.6g}" for v in vals)}]
    return check


def close_check(name: str, operation: str, column: str, target: float, tol: float) -> Check:
    def check(outputs: List[AgentOutput]) -> List[dict]:
        vals = _column(outputs, operation, column)
        ok = bool(vals) and all(abs(v - target) <= tol for v in vals)
        return [{"check": name, "passed": ok, "detail": f"{column}={vals} target {target:.15g} ± {tol:g}"}]
    return check


def zero_failures_check(name: str, operation: str) -> Check:
    def check(outputs: List[AgentOutput]) -> List[dict]:
        out = []
        for o in outputs:
            if o.operation != operation or not o.ok:
                continue
            for _, row in o.data.iterrows():
                out.append({"check": f"{name}:{row['check']}", "passed": int(row["failures"]) == 0,
                            "detail": f"{int(row['failures'])} failures in {int(row['trials'])} trials"})
        return out or [{"check": name, "passed": False, "detail": "no verification output"}]
    return check


class ExperimentOrchestrator:
    def __init__(self, cache_dir: Optional[str] = None, workers: Optional[int] = None, timing: bool = False):
        self._cache_dir = cache_dir
        self._workers = workers
        self._timing = timing
        self._agents = {
            "MultSieve": MultSieveAgent(cache_dir),
            "PolyAlgebra": PolyAlgebraAgent(cache_dir),
            "Norms": NormsAgent(cache_dir),
            "PhaseOpt": PhaseOptAgent(cache_dir),
            "Pretentious": PretentiousAgent(cache_dir),
            "Nilmanifold": NilmanifoldAgent(cache_dir),
            "Patterns": PatternsAgent(cache_dir),
        }

    @property
    def agents(self) -> Dict[str, object]:
        return dict(self._agents)

    # ------------------------------------------------------------------
    # Planning
    # ------------------------------------------------------------------
    def plan_experiment(self, cfg: ExperimentConfig) -> List[Step]:
        """One step per X (or N) rung of the config."""
        p = cfg.params
        seed = cfg.seed
        if cfg.kind == "sieve":
            return [_step("MultSieve", "sieve", spec=p.spec, start=p.start, end=p.end)]
        if cfg.kind == "gowers-avg":
            return [_step("Norms", "averaged_gowers", spec=p.spec, X=X, H=parse_h_rule(p.H, X), k=p.k,
                          samples=p.samples, seed=seed, method=p.method, logarithmic=p.logarithmic)
                    for X in p.X]
        if cfg.kind == "weak-gowers":
            return [_step("PhaseOpt", "averaged_weak_gowers", spec=p.spec, X=X, H=parse_h_rule(p.H, X), k=p.k,
                          samples=p.samples, seed=seed, sigma=p.sigma, mode=p.mode)
                    for X in p.X]
        if cfg.kind == "pretentious":
            return [_step("Pretentious", "m_score", f=p.spec, X=X, Q=p.Q, t_resolution=p.t_resolution,
                          t_max=p.t_max)
                    for X in p.X]
        if cfg.kind == "patterns":
            return [_step("Patterns", "sign_patterns", k=k, N=N) for k in (p.ks or [p.k]) for N in p.N]
        if cfg.kind == "chowla":
            return [_step("Patterns", "chowla_average", shifts=p.shifts, X=X, epsilon=p.epsilon,
                          logarithmic=p.logarithmic) for X in p.X]
        if cfg.kind == "polyavg":
            return [_step("Patterns", "poly_average", polys=p.polys, weights=p.weights, X=X, epsilon=p.epsilon,
                          logarithmic=p.logarithmic) for X in p.X]
        if cfg.kind == "nilseq":
            steps = [_step("Nilmanifold", "discorrelation", spec=p.spec, F=p.F, coeffs=p.coeffs,
                           x=X, H=parse_h_rule(p.H, X)) for X in p.X]
            return steps + [_step("Nilmanifold", "equidistribution_defect", F=p.F, coeffs=p.coeffs, N=N)
                            for N in p.N]
        if cfg.kind == "algebra":
            return [_step("PolyAlgebra", "verify", trials=p.samples, seed=seed),
                    _step("Nilmanifold", "verify", heisenberg_trials=p.samples,
                          four_dim_trials=max(1, p.samples // 10), seed=seed)]
        raise InvalidParameterError(f"unknown experiment kind '{cfg.kind}'")

    def plan_suite(self, name: str) -> tuple:
        """(steps, checks) of a named acceptance ladder."""
        rungs = [10**4, 10**5, 10**6]
        if name == "decay-u2":
            steps = [_step("Norms", "averaged_gowers", spec="liouville", X=X, H=math.ceil(X ** 0.4 - 1e-9),
                           k=1, samples=200, seed=1, method="recursive") for X in rungs]
            return steps, [monotone_check("U2 decay", "averaged_gowers", "mean_norm", True, True, 3)]
        if name == "decay-weak":
            steps = [_step("PhaseOpt", "averaged_weak_gowers", spec="liouville", X=X, H=48, k=2, samples=50,
                           seed=1, sigma=0.02, mode="exhaustive") for X in rungs]
            return steps, [monotone_check("weak u3 decay", "averaged_weak_gowers", "mean_norm", True, True, 3)]
        if name == "pretentious-growth":
            steps = [_step("Pretentious", "m_score", f="liouville", X=X, Q=10, t_resolution=0.05,
                           t_max=PRETENTIOUS_T_MAX)
                     for X in (10**3, 10**4, 10**5)]
            steps.append(_step("Pretentious", "distance", f="liouville", g={"kind": "character_twist"}, X=10))
            target = 2 * (1 / 2 + 1 / 3 + 1 / 5 + 1 / 7)
            return steps, [monotone_check("M(λ;X,10) growth", "m_score", "value", False, False, 3),
                           close_check("D(λ,1;10)^2", "distance", "distance_sq", target, 1e-12)]
        if name == "chowla-decay":
            steps = [_step("Patterns", "chowla_average", shifts=[0, 1], X=X, epsilon=0.3) for X in rungs]
            return steps, [monotone_check("Chowla decay", "chowla_average", "value", True, True, 3)]
        if name == "nil-discorrelation":
            steps = [_step("Nilmanifold", "discorrelation", spec="liouville", F="horizontal(1,0)",
                           coeffs=HEISENBERG_DEFAULT, x=X, H=1000) for X in rungs]
            steps.append(_step("Nilmanifold", "self_correlation", F="horizontal(1,1)",
                               coeffs=HEISENBERG_DEFAULT, x=10**5, H=1000))
            steps += [_step("Nilmanifold", "equidistribution_defect", F="horizontal(1,1)",
                            coeffs="1:sqrt(2):sqrt(3):0", N=N) for N in (10**3, 10**5)]
            return steps, [close_check("self-correlation", "self_correlation", "abs", 1.0, 1e-9),
                           monotone_check("equidistribution", "equidistribution_defect", "defect",
                                          True, True, 2)]
        if name == "algebra-verify":
            steps = [_step("PolyAlgebra", "verify", trials=2500, seed=1),
                     _step("Nilmanifold", "verify", heisenberg_trials=1000, four_dim_trials=100,
                           bezout_trials=5, seed=1)]
            return steps, [zero_failures_check("exact polynomial algebra", "verify")]
        raise InvalidParameterError(f"unknown suite '{name}'. Options: {', '.join(SUITES)}")

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------
    def execute(self, name: str, steps: List[Step]) -> tuple:
        outputs: List[AgentOutput] = []
        steps_executed: List[dict] = []
        rows: List[ResultRow] = []

        for i, step in enumerate(steps):
            agent_name, operation = str(step["agent"]), str(step["operation"])
            parameters = dict(step.get("parameters", {}))
            if self._workers is not None:
                parameters.setdefault("workers", self._workers)
            agent = self._agents.get(agent_name)
            if agent is None:
                raise InvalidParameterError(f"unknown agent '{agent_name}'")

            started = time.perf_counter()
            try:
                output = agent.run(AgentInput(operation=operation, parameters=parameters, context=name))
            except Exception as e:
                logger.error("%s.%s failed: %s", agent_name, operation, e)
                output = AgentOutput(agent=agent_name, operation=operation, params=parameters, error=str(e))
            elapsed = time.perf_counter() - started
            logger.info("step %d/%d %s.%s done in %.2fs", i + 1, len(steps), agent_name, operation, elapsed)

            outputs.append(output)
            steps_executed.append({
                "agent": agent_name,
                "operation": operation,
                "success": output.error is None,
                "row_count": len(output.data) if output.data is not None else 0,
            })
            if output.data is not None:
                for record in output.data.to_dict("records"):
                    rows.append(ResultRow(experiment=f"{name}:{operation}", values=record,
                                          wall_time=elapsed if self._timing else None))
        return outputs, steps_executed, rows

    def _finish(self, name: str, steps: List[Step], checks: List[Check], output: Optional[str],
                force: bool) -> ExperimentResult:
        if output and Path(output).exists() and not force:
            logger.warning("%s exists; nothing written (use --force to overwrite)", output)
            return ExperimentResult(name, [], [], [], f"{output} exists; skipped.", output_path=output, skipped=True)

        outputs, steps_executed, rows = self.execute(name, steps)
        results = [r for check in checks for r in check(outputs)]
        summaries = [o.summary for o in outputs if o.summary and not o.error]
        errors = [f"{o.agent}.{o.operation}: {o.error}" for o in outputs if o.error]
        narrative = "\n".join(summaries + errors) if summaries or errors else "No results generated."

        if output:
            write_csv(rows, output)
        return ExperimentResult(name, steps_executed, outputs, rows, narrative, results, output)

    def run_config(self, cfg: ExperimentConfig, force: bool = False) -> ExperimentResult:
        return self._finish(cfg.kind, self.plan_experiment(cfg), [], cfg.output, force)

    def run_suite(self, name: str, output: Optional[str] = None, force: bool = False) -> ExperimentResult:
        steps, checks = self.plan_suite(name)
        return self._finish(name, steps, checks, output, force)


def _step(agent: str, operation: str, **parameters) -> Step:
    return {"agent": agent, "operation": operation, "parameters": parameters}


def write_csv(rows: List[ResultRow], path: str) -> None:
    """RFC-4180 CSV with a header row; byte-identical for identical rows."""
    df = pd.DataFrame([r.flat() for r in rows])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\r\n", encoding="utf-8", float_format="%.15g")
    logger.info("wrote %d rows to %s", len(df), path)
